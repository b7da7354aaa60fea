//! Agreement between predicted and gold scores: Spearman's rho, Pearson's r,
//! RMSE and quadratic weighted kappa.

use std::fmt;

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64], min_len: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < min_len {
        return Err(Error::Data(format!(
            "need at least {min_len} samples, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite score".into()));
    }
    Ok(())
}

/// Fractional ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn pearson_r(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 {
        return Err(Error::UndefinedCorrelation("first sequence"));
    }
    if var_b == 0.0 {
        return Err(Error::UndefinedCorrelation("second sequence"));
    }
    Ok((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b, 2)?;
    pearson_r(&average_ranks(a), &average_ranks(b))
}

pub fn rmse(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_pair(pred, gold, 1)?;
    let mse = pred
        .iter()
        .zip(gold)
        .map(|(p, g)| (p - g) * (p - g))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Inclusive integer score scale for kappa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntRange {
    pub min: i64,
    pub max: i64,
}

impl IntRange {
    pub fn new(min: i64, max: i64) -> Result<Self> {
        if min > max {
            return Err(Error::Config(format!("empty score range [{min}, {max}]")));
        }
        Ok(IntRange { min, max })
    }

    pub fn categories(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    /// Round half away from zero, then clamp into the range.
    pub fn discretize(&self, x: f64) -> i64 {
        (x.round() as i64).clamp(self.min, self.max)
    }
}

/// Cohen's kappa with quadratic weights. Predictions are discretised with
/// [`IntRange::discretize`]; gold scores must already be integers in range.
pub fn quadratic_weighted_kappa(pred: &[f64], gold: &[f64], range: IntRange) -> Result<f64> {
    check_pair(pred, gold, 1)?;
    let k = range.categories();
    if k < 2 {
        return Err(Error::Data("kappa needs a score range with at least two values".into()));
    }
    let mut observed = vec![vec![0.0f64; k]; k];
    for (&p, &g) in pred.iter().zip(gold) {
        if g.fract() != 0.0 || g < range.min as f64 || g > range.max as f64 {
            return Err(Error::Data(format!(
                "gold score {g} is not an integer in [{}, {}]",
                range.min, range.max
            )));
        }
        let i = (range.discretize(p) - range.min) as usize;
        let j = (g as i64 - range.min) as usize;
        observed[i][j] += 1.0;
    }
    let n = pred.len() as f64;
    let row: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| observed.iter().map(|r| r[j]).sum()).collect();
    let denom_w = ((k - 1) * (k - 1)) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = ((i as f64 - j as f64).powi(2)) / denom_w;
            num += w * observed[i][j];
            den += w * row[i] * col[j] / n;
        }
    }
    if den == 0.0 {
        return Err(Error::Data(
            "kappa undefined: expected disagreement is zero (all scores in one category)".into(),
        ));
    }
    Ok(1.0 - num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub spearman_rho: f64,
    pub pearson_r: f64,
    pub rmse: f64,
    pub qwk: f64,
    pub n: usize,
}

pub const CSV_HEADER: &str = "model,n,spearman,pearson,rmse,qwk";

impl MetricsReport {
    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{},{},{},{},{},{}",
            model.replace(',', ";"),
            self.n,
            self.spearman_rho,
            self.pearson_r,
            self.rmse,
            self.qwk
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<(String, Self)> {
        let bad = || Error::Data(format!("malformed metrics row `{line}`"));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        Ok((
            f[0].to_string(),
            MetricsReport {
                n: f[1].parse().map_err(|_| bad())?,
                spearman_rho: num(f[2])?,
                pearson_r: num(f[3])?,
                rmse: num(f[4])?,
                qwk: num(f[5])?,
            },
        ))
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n          {}", self.n)?;
        writeln!(f, "spearman   {:.4}", self.spearman_rho)?;
        writeln!(f, "pearson    {:.4}", self.pearson_r)?;
        writeln!(f, "rmse       {:.4}", self.rmse)?;
        write!(f, "qwk        {:.4}", self.qwk)
    }
}

pub fn report(pred: &[f64], gold: &[f64], range: IntRange) -> Result<MetricsReport> {
    Ok(MetricsReport {
        spearman_rho: spearman_rho(pred, gold)?,
        pearson_r: pearson_r(pred, gold)?,
        rmse: rmse(pred, gold)?,
        qwk: quadratic_weighted_kappa(pred, gold, range)?,
        n: pred.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spearman_examples() {
        let a = [3.0, 1.0, 4.0, 1.5, 9.0];
        assert!((spearman_rho(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = a.iter().map(|x| -x * x * x).collect();
        assert!((spearman_rho(&a, &rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_hand_ranks() {
        // a ranks [1, 2.5, 2.5, 4], b ranks [1, 3, 2, 4]
        // centred: a [-1.5, 0, 0, 1.5], b [-1.5, 0.5, -0.5, 1.5]
        // cov = 2.25 + 2.25 = 4.5, var_a = 4.5, var_b = 5
        let rho = spearman_rho(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 7.0];
        let affine: Vec<f64> = a.iter().map(|x| 2.0 * x + 3.0).collect();
        assert!((pearson_r(&a, &affine).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((pearson_r(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_an_error() {
        assert!(matches!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0], &[3.0]).unwrap(), 3.0);
        assert_eq!(rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5f64.sqrt());
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn kappa_examples() {
        let r = IntRange::new(0, 10).unwrap();
        let gold = [0.0, 3.0, 5.0, 10.0, 7.0];
        assert_eq!(quadratic_weighted_kappa(&gold, &gold, r).unwrap(), 1.0);
        let r01 = IntRange::new(0, 1).unwrap();
        assert_eq!(quadratic_weighted_kappa(&[0.0, 1.0], &[1.0, 0.0], r01).unwrap(), -1.0);
        assert!(quadratic_weighted_kappa(&[], &[], r).is_err());
        assert!(quadratic_weighted_kappa(&[1.0], &[1.5], r).is_err());
        // every score in one category on both sides: no expected disagreement
        assert!(quadratic_weighted_kappa(&[2.0, 2.0], &[2.0, 2.0], r).is_err());
    }

    #[test]
    fn discretize_rounds_half_away_and_clamps() {
        let r = IntRange::new(0, 3).unwrap();
        assert_eq!(r.discretize(1.5), 2);
        assert_eq!(r.discretize(2.49), 2);
        assert_eq!(r.discretize(-0.6), 0);
        assert_eq!(r.discretize(7.2), 3);
    }

    #[test]
    fn report_composition_and_csv() {
        let gold = [1.0, 2.0, 3.0, 4.0];
        let rep = report(&gold, &gold, IntRange::new(0, 4).unwrap()).unwrap();
        assert_eq!((rep.spearman_rho, rep.pearson_r, rep.rmse, rep.qwk, rep.n), (1.0, 1.0, 0.0, 1.0, 4));
        let row = rep.csv_row("lstm");
        assert_eq!(CSV_HEADER.split(',').count(), row.split(',').count());
        let (name, back) = MetricsReport::parse_csv_row(&row).unwrap();
        assert_eq!(name, "lstm");
        assert_eq!(back, rep);
    }

    fn monotone(x: f64) -> f64 {
        x.powi(3) + 2.0 * x
    }

    proptest! {
        #[test]
        fn invariances(
            pairs in prop::collection::vec((0i64..=10, 0i64..=10), 3..40),
            shift in -5i64..5,
            scale in 0.1f64..10.0,
            offset in -10.0f64..10.0,
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let rho = spearman_rho(&a, &b);
            let r = pearson_r(&a, &b);
            prop_assume!(rho.is_ok() && r.is_ok());
            let (rho, r) = (rho.unwrap(), r.unwrap());
            prop_assert!((-1.0..=1.0).contains(&rho) && (-1.0..=1.0).contains(&r));

            // symmetry
            prop_assert!((spearman_rho(&b, &a).unwrap() - rho).abs() < 1e-12);
            prop_assert!((pearson_r(&b, &a).unwrap() - r).abs() < 1e-12);
            prop_assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());

            // spearman: monotone transform of one side
            let ta: Vec<f64> = a.iter().map(|&x| monotone(x)).collect();
            prop_assert!((spearman_rho(&ta, &b).unwrap() - rho).abs() < 1e-12);

            // pearson: positive affine transform
            let aa: Vec<f64> = a.iter().map(|&x| scale * x + offset).collect();
            prop_assert!((pearson_r(&aa, &b).unwrap() - r).abs() < 1e-9);

            let range = IntRange::new(0, 10).unwrap();
            if let Ok(k) = quadratic_weighted_kappa(&a, &b, range) {
                prop_assert!((quadratic_weighted_kappa(&b, &a, range).unwrap() - k).abs() < 1e-12);
                let sa: Vec<f64> = a.iter().map(|x| x + shift as f64).collect();
                let sb: Vec<f64> = b.iter().map(|x| x + shift as f64).collect();
                let shifted = IntRange::new(shift, 10 + shift).unwrap();
                prop_assert!((quadratic_weighted_kappa(&sa, &sb, shifted).unwrap() - k).abs() < 1e-12);
            }
        }
    }
}
