fn main() {
    std::process::exit(otgcf_cli::run(std::env::args_os()));
}
