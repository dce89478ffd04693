fn main() {
    std::process::exit(wignerlab::cli::run(std::env::args_os()));
}
