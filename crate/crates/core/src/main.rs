fn main() {
    std::process::exit(cyber_contract::cli::main_with_args(std::env::args_os()));
}
