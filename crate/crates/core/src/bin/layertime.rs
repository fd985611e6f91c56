fn main() {
    std::process::exit(layertime::cli::run(std::env::args_os()));
}
