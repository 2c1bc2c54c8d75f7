fn main() {
    std::process::exit(ota_cli::main_with_args(std::env::args_os()));
}
