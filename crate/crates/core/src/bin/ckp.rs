fn main() {
    std::process::exit(ckp::cli::run(std::env::args_os()));
}
