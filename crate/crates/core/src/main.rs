fn main() {
    std::process::exit(accompany_lab::harness::cli::run(std::env::args_os()));
}
