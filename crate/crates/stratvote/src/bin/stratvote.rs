fn main() {
    std::process::exit(stratvote::cli::run(std::env::args_os()));
}
