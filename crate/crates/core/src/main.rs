fn main() {
    std::process::exit(markov_thermo::cli::main_with_args(std::env::args()));
}
