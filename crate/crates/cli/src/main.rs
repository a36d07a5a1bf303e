fn main() {
    std::process::exit(kdvb_cli::run(std::env::args_os()));
}
