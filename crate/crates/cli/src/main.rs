fn main() {
    std::process::exit(divlayer_cli::run());
}
