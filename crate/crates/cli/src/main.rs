use clap::Parser;

fn main() {
    let cli = ionstrobe_cli::Cli::parse();
    match ionstrobe_cli::run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("ionstrobe: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
