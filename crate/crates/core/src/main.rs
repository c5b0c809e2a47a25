fn main() {
    std::process::exit(aperture_forge::cli::run(std::env::args_os()));
}
