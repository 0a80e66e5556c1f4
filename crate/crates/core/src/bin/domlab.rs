fn main() {
    std::process::exit(domlab::cli::main_entry());
}
