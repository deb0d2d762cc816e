fn main() {
    let code = surfwave::cli::run(std::env::args_os());
    std::process::exit(code);
}
