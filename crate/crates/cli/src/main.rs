fn main() {
    std::process::exit(walkscope_cli::main_entry());
}
