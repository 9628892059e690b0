fn main() {
    std::process::exit(cptlaw::run(std::env::args_os()));
}
