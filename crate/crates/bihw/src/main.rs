fn main() {
    std::process::exit(bihw::run(std::env::args_os()));
}
