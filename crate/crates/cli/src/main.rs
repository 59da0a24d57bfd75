fn main() {
    std::process::exit(gexpect_cli::main_with(std::env::args_os()));
}
