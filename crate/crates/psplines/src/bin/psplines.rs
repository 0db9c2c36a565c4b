fn main() {
    std::process::exit(psplines::cli::run(std::env::args_os()));
}
