use clap::Parser;
use conflow::cli::{run, CliConfig};

fn main() {
    let cfg = match CliConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let (code, out) = run(&cfg);
    print!("{}", out);
    std::process::exit(code);
}
