fn main() {
    std::process::exit(rarefit::cli::main_with_args(std::env::args_os()));
}
