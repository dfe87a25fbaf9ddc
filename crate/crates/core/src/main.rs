fn main() {
    std::process::exit(phasecrystal::cli::main_entry());
}
