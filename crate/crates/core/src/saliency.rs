//! Token quality from input-gradient magnitudes.
//!
//! Each essay is scored twice against artificial gold scores: the set maximum
//! and the set minimum. A token whose embedding would need little adjustment
//! to reach the maximum, and much to reach the minimum, is a good token:
//! `q = mag_min - mag_max`. Tokens are coloured by per-essay octile of `q`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use ndarray::Array1;
use regex::Regex;

use crate::binio::write_atomic;
use crate::corpus::{Essay, ScoreRanges};
use crate::error::{Error, Result};
use crate::linalg::l2_norm;
use crate::seqmodel::SeqModel;

pub const BINS: usize = 8;

/// 256-colour backgrounds, bin 0 (darkest red) to bin 7 (darkest green).
pub const ANSI_COLORS: [u8; BINS] = [52, 88, 124, 167, 151, 71, 28, 22];

pub const HTML_COLORS: [&str; BINS] = [
    "#7f0000", "#b21f1f", "#e06666", "#f4cccc", "#d9ead3", "#93c47d", "#38761d", "#1e4d0f",
];

/// Gold scores, in scaled space, used only to probe gradient magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoScores {
    pub max: f64,
    pub min: f64,
}

impl PseudoScores {
    /// The essay set's own extremes.
    pub fn for_set(ranges: &ScoreRanges, set_id: u32) -> Result<Self> {
        let (min, max) = ranges.scaled_bounds(set_id)?;
        Ok(PseudoScores { max, min })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenQuality {
    pub token: String,
    pub mag_max: f64,
    pub mag_min: f64,
    pub quality: f64,
    pub bin: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityMap {
    pub essay_id: u64,
    /// Raw-scale prediction for the whole essay.
    pub prediction: f64,
    pub tokens: Vec<TokenQuality>,
}

impl QualityMap {
    pub fn mean_quality(&self) -> f64 {
        self.tokens.iter().map(|t| t.quality).sum::<f64>() / self.tokens.len() as f64
    }
}

/// `∂(ŷ - pseudo)² / ∂x_t` for every position `t`, without dropout.
/// The model is only read.
pub fn input_gradients(model: &SeqModel, tokens: &[usize], pseudo: f64) -> Result<Vec<Array1<f64>>> {
    let cache = model.forward(tokens, None)?;
    if !cache.prediction.is_finite() {
        return Err(Error::Numerical("non-finite prediction".into()));
    }
    let (_, dx) = model.backward_from(&cache, 2.0 * (cache.prediction - pseudo));
    Ok(dx)
}

/// Octile bins of `q`, ranking by `(q, position)`. Ties resolve to the
/// earlier position getting the lower rank.
pub fn octile_bins(q: &[f64]) -> Vec<u8> {
    let n = q.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    let mut bins = vec![0u8; n];
    for (rank, &pos) in order.iter().enumerate() {
        bins[pos] = (rank * BINS / n) as u8;
    }
    bins
}

/// Per-position gradient magnitudes under the max and min pseudo-scores.
fn magnitudes(model: &SeqModel, tokens: &[usize], pseudo: PseudoScores) -> Result<Vec<(f64, f64)>> {
    let g_max = input_gradients(model, tokens, pseudo.max)?;
    let g_min = input_gradients(model, tokens, pseudo.min)?;
    Ok(g_max
        .iter()
        .zip(&g_min)
        .map(|(a, b)| (l2_norm(a.view()), l2_norm(b.view())))
        .collect())
}

fn assemble(
    essay: &Essay,
    words: &[String],
    prediction: f64,
    mags: Vec<(f64, f64)>,
) -> QualityMap {
    let q: Vec<f64> = mags.iter().map(|(mx, mn)| mn - mx).collect();
    let bins = octile_bins(&q);
    let tokens = mags
        .into_iter()
        .zip(q)
        .zip(bins)
        .zip(words)
        .map(|((((mag_max, mag_min), quality), bin), w)| TokenQuality {
            token: w.clone(),
            mag_max,
            mag_min,
            quality,
            bin,
        })
        .collect();
    QualityMap {
        essay_id: essay.essay_id,
        prediction,
        tokens,
    }
}

fn check_words(essay: &Essay, words: &[String]) -> Result<()> {
    if essay.tokens.is_empty() {
        return Err(Error::Data(format!("essay {} is empty", essay.essay_id)));
    }
    if words.len() != essay.tokens.len() {
        return Err(Error::Shape(format!(
            "essay {} has {} ids but {} surface tokens",
            essay.essay_id,
            essay.tokens.len(),
            words.len()
        )));
    }
    Ok(())
}

/// Quality of every token from one pass over the whole essay. `words` are the
/// surface tokens shown in the rendering, one per id.
pub fn quality_map(
    model: &SeqModel,
    essay: &Essay,
    words: &[String],
    ranges: &ScoreRanges,
) -> Result<QualityMap> {
    check_words(essay, words)?;
    let pseudo = PseudoScores::for_set(ranges, essay.set_id)?;
    let mags = magnitudes(model, &essay.tokens, pseudo)?;
    let prediction = crate::seqmodel::predict_one(model, essay, ranges)?;
    Ok(assemble(essay, words, prediction, mags))
}

/// Phrase-level variant: the essay is cut into consecutive spans of
/// `span_len` tokens, each fed to the network on its own. Bins are still
/// assigned over the whole essay. `span_len >= len` equals [`quality_map`].
pub fn span_quality_map(
    model: &SeqModel,
    essay: &Essay,
    words: &[String],
    ranges: &ScoreRanges,
    span_len: usize,
) -> Result<QualityMap> {
    if span_len == 0 {
        return Err(Error::Config("span length must be positive".into()));
    }
    check_words(essay, words)?;
    let pseudo = PseudoScores::for_set(ranges, essay.set_id)?;
    let mut mags = Vec::with_capacity(essay.tokens.len());
    for span in essay.tokens.chunks(span_len) {
        mags.extend(magnitudes(model, span, pseudo)?);
    }
    let prediction = crate::seqmodel::predict_one(model, essay, ranges)?;
    Ok(assemble(essay, words, prediction, mags))
}

fn ansi_escape() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new("\x1b\\[[0-9;]*m").expect("valid regex"))
}

/// Removes SGR escape sequences.
pub fn strip_ansi(s: &str) -> String {
    ansi_escape().replace_all(s, "").into_owned()
}

/// Tokens joined by single spaces, each on its bin's background colour.
/// `monochrome` replaces colours with `token[bin]` suffixes.
pub fn render_ansi(map: &QualityMap, monochrome: bool) -> String {
    let mut out = String::new();
    for (i, t) in map.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if monochrome {
            let _ = write!(out, "{}[{}]", t.token, t.bin);
        } else {
            let code = ANSI_COLORS[t.bin as usize];
            let _ = write!(out, "\x1b[48;5;{code}m\x1b[97m{}\x1b[0m", t.token);
        }
    }
    out
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// A standalone, well-formed HTML page with one coloured span per token.
/// `metadata` pairs become `<meta>` tags.
pub fn render_html(map: &QualityMap, metadata: &[(String, String)]) -> Result<String> {
    if map.tokens.is_empty() {
        return Err(Error::Data(format!("essay {} has no tokens", map.essay_id)));
    }
    let title = format!("essay {}: predicted {:.2}", map.essay_id, map.prediction);
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n");
    for (k, v) in metadata {
        let _ = writeln!(
            out,
            "<meta name=\"{}\" content=\"{}\"/>",
            escape_html(k),
            escape_html(v)
        );
    }
    let _ = writeln!(out, "<title>{}</title>", escape_html(&title));
    out.push_str("<style>span.t{padding:1px 2px;border-radius:2px;line-height:1.9}</style>\n");
    let _ = writeln!(out, "</head>\n<body>\n<h1>{}</h1>\n<p>", escape_html(&title));
    for (i, t) in map.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let fg = if (2..=5).contains(&t.bin) { "#000" } else { "#fff" };
        let _ = write!(
            out,
            "<span class=\"t\" data-bin=\"{}\" title=\"q={:.3e}\" style=\"background:{};color:{}\">{}</span>",
            t.bin,
            t.quality,
            HTML_COLORS[t.bin as usize],
            fg,
            escape_html(&t.token)
        );
    }
    out.push_str("\n</p>\n</body>\n</html>\n");
    Ok(out)
}

pub fn write_html(map: &QualityMap, path: &Path, metadata: &[(String, String)]) -> Result<()> {
    write_atomic(path, render_html(map, metadata)?.as_bytes())
}
