fn main() {
    std::process::exit(dclstm::cli::run(std::env::args_os()));
}
