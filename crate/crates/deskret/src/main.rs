fn main() {
    std::process::exit(deskret::cli::main_impl());
}
