fn main() {
    std::process::exit(crowdcell_cli::main_with(std::env::args()));
}
