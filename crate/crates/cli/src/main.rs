fn main() {
    std::process::exit(twophase_cli::main_with(std::env::args_os()));
}
