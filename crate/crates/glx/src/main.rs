use clap::Parser;

fn main() {
    let cli = glx::cli::Cli::parse();
    std::process::exit(glx::cli::main_with(cli));
}
