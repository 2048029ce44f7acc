fn main() {
    std::process::exit(objsal_cli::run(std::env::args_os()));
}
