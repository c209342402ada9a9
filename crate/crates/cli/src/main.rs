fn main() {
    std::process::exit(phasespace_cli::main_with(std::env::args_os()));
}
