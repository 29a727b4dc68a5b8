use stablesketch_cli::{commands, Config, Outcome};
use std::process::ExitCode;

const USAGE: &str = "usage: stablesketch <command> [key=value ...] [config=FILE]

commands:
  gen                n= d= out= [spectrum=ones|geom:Q|poly:P|lowrank:R:NOISE] [rank=] [seed=]
  amm                a= b= k= eps= family= [m=|delta= c=] [trials=] [seed=] [max_fail=] [out=]
  ose-moment         n= d= family= [m=|k= eps= delta= c=] [ell=] [trials=] [seed=] [max=] [out=]
  bss                a= k= eps= out=
  regress            a= b= k= eps= family= [m=|delta= c=] [trials=] [seed=] [min_pass=] [out=]
  lowrank            a= k= eps= family= [m=|delta= c=] [trials=] [seed=] [min_pass=] [out=]
  krr                kernel=|points= bandwidth=  y= lambda= family= [m=|k= eps= delta= c=]
                     [trials=] [seed=] [max_gap=] [min_pass=] [out=]
  verify-conditions  a= b= k= eps= family= [m=|delta= c=] [seed=] [big_c=] [big_cprime=] [out=]
  calibrate          a= b= family= k= eps= delta= [trials=] [seed=]

exit codes: 0 success, 1 failed acceptance predicate, 2 usage or IO error.
Any command also accepts threads=N to bound the worker pool.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(2);
    };
    if command == "help" || command == "--help" || command == "-h" {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let cfg = match Config::from_args(&args[1..]) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(command, &cfg) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::PredicateFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
