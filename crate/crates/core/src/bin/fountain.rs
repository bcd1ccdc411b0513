fn main() {
    std::process::exit(ion_fountain::cli::run(std::env::args_os()));
}
