fn main() {
    std::process::exit(wuyang::cli::run(std::env::args_os()));
}
