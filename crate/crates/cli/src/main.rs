use clap::Parser;

fn main() {
    let cli = bethe_circuit_cli::Cli::parse();
    match bethe_circuit_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
