fn main() {
    std::process::exit(mmviad::cli::run(std::env::args_os()));
}
