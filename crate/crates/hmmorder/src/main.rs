fn main() {
    std::process::exit(hmmorder::cli::main_with(std::env::args_os()));
}
