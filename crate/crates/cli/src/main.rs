fn main() {
    std::process::exit(decompkan_cli::main_with_args(std::env::args_os()));
}
