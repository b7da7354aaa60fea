fn main() {
    std::process::exit(ats::cli::main_with_args(std::env::args_os()));
}
