fn main() {
    std::process::exit(clonelab_cli::run(std::env::args_os()));
}
