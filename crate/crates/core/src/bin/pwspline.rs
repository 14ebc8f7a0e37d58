fn main() {
    std::process::exit(pwspline::cli::run(std::env::args_os()));
}
