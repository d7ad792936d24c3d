fn main() {
    std::process::exit(gazelens_cli::execute(std::env::args_os()));
}
