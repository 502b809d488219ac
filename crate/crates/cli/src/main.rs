use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridlink::cli_io::{
    generate_fleet, load_efficiency_table, load_grid, load_network_file, read_file, run_manifest, write_file, CliError,
    FleetDocument, FleetSpec, GridSource, RunOutcome, DEFAULT_MIX, DEMO_MANIFEST,
};
use gridlink::coordinator::ScenarioReport;
use gridlink::power_grid::{solve_dcopf, DcopfSolution, GridCase};
use gridlink::powertrain::{BatteryState, ChargePolicy, EnergyPrices, EvAgent, PowertrainClass, DEFAULT_GAS_PRICE};
use gridlink::rng::{substream, Stream};
use gridlink::routing::{PlanOptions, RoutingContext, TripPlan, DEFAULT_CANDIDATES, DEFAULT_SEARCH_RADIUS_M};
use gridlink::stations::{offered_price, sample_cpi, ChargingStation, DEFAULT_CPI_RANGE};
use gridlink::transport_graph::{generate_synthetic, SyntheticConfig, MILES_PER_METER};

#[derive(Parser)]
#[command(name = "gridlink", version, about = "EV routing, charging prices and DC optimal power flow in one loop")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Pretty,
    Machine,
}

#[derive(Args)]
struct Common {
    /// Output style: readable text or JSON.
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenarios of a manifest and write reports.
    Run {
        /// Manifest file; omit with --demo.
        manifest: Option<PathBuf>,
        /// Use the bundled demo manifest.
        #[arg(long, conflicts_with = "manifest")]
        demo: bool,
        /// Output directory, overriding the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the manifest.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic road network with charging stations.
    ///
    /// Station margins are drawn uniformly from 0 to 12 percent on the seed's CPI stream.
    GenNetwork {
        #[arg(long, default_value_t = 60)]
        nodes: usize,
        /// Two-way roads.
        #[arg(long, default_value_t = 110)]
        roads: usize,
        #[arg(long, default_value_t = 50)]
        stations: usize,
        #[arg(long, default_value_t = 6)]
        regions: usize,
        /// Stations per region, comma separated.
        #[arg(long, value_delimiter = ',')]
        region_sizes: Option<Vec<usize>>,
        /// Side of the square area in meters.
        #[arg(long)]
        side_m: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a vehicle fleet over a network file.
    GenFleet {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        n: usize,
        /// Shares of PHEV20, PHEV40, PHEV60, BEV100.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MIX)]
        mix: Vec<f64>,
        #[arg(long, default_value_t = 0.2)]
        soc_min: f64,
        #[arg(long, default_value_t = 0.9)]
        soc_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the DC optimal power flow of a grid case.
    Opf {
        /// Grid case file; the bundled 9-bus case when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Extra load per bus in MW, comma separated, in bus order.
        #[arg(long, value_delimiter = ',')]
        extra_load: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Plan one trip with a possible charging stop.
    Route {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        origin: usize,
        #[arg(long)]
        destination: usize,
        /// PHEV20, PHEV40, PHEV60 or BEV100.
        #[arg(long)]
        class: PowertrainClass,
        /// Initial state of charge as a fraction of usable capacity.
        #[arg(long)]
        soc: f64,
        /// Flat station price in $/kWh.
        #[arg(long, default_value_t = 0.05)]
        price: f64,
        /// Quote LMP plus each station's margin instead of the flat price, $/MWh.
        #[arg(long)]
        lmp: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GAS_PRICE)]
        p_gas: f64,
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        #[arg(long, default_value_t = DEFAULT_SEARCH_RADIUS_M)]
        d_search_m: f64,
        /// Buy just enough energy to finish instead of filling the battery.
        #[arg(long)]
        fill_to_need: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { manifest, demo, out, seed, common } => {
            let (text, base) = match (manifest, demo) {
                (_, true) => (DEMO_MANIFEST.to_string(), PathBuf::from(".")),
                (Some(p), false) => {
                    let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                    (read_file(&p)?, base)
                }
                (None, false) => return Err(CliError::Validation("give a manifest path or --demo".into())),
            };
            let outcome = run_manifest(&text, &base, out.as_deref(), seed)?;
            match common.format {
                Format::Pretty => print!("{}", pretty_run(&outcome)),
                Format::Machine => println!(
                    "{}",
                    to_json(&serde_json::json!({
                        "out_dir": outcome.out_dir,
                        "reports": outcome.reports.iter().map(summary_json).collect::<Vec<_>>(),
                        "comparison": outcome.comparison,
                    }))
                ),
            }
            match outcome.failure() {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
        Command::GenNetwork { nodes, roads, stations, regions, region_sizes, side_m, seed, out } => {
            let mut cfg = SyntheticConfig::new(nodes, roads, stations, regions);
            cfg.side_m = side_m;
            cfg.region_sizes = region_sizes;
            let syn = generate_synthetic(&cfg, seed)?;
            let mut doc = syn.to_document();
            let cpis = sample_cpi(doc.stations.len(), &mut substream(seed, Stream::Cpi), DEFAULT_CPI_RANGE);
            for (s, c) in doc.stations.iter_mut().zip(cpis) {
                s.cpi_percent = c;
            }
            write_file(&out, &doc.to_json())?;
            println!(
                "wrote {} ({} nodes, {} segments, {} stations)",
                out.display(),
                nodes,
                syn.network.segments().len(),
                stations
            );
            Ok(())
        }
        Command::GenFleet { network, n, mix, soc_min, soc_max, seed, out } => {
            let (_, net) = load_network_file(&network, MILES_PER_METER)?;
            let table = load_efficiency_table(None)?;
            let mix: [f64; 4] = mix
                .try_into()
                .map_err(|m: Vec<f64>| CliError::Validation(format!("--mix needs four shares, got {}", m.len())))?;
            let spec = FleetSpec { n_evs: n, mix, soc: [soc_min, soc_max] };
            let evs = generate_fleet(&spec, &net, &table, seed)?;
            write_file(&out, &FleetDocument { evs }.to_json())?;
            println!("wrote {} ({n} vehicles)", out.display());
            Ok(())
        }
        Command::Opf { grid, extra_load, common } => {
            let source = match grid {
                Some(p) => GridSource::File(p),
                None => GridSource::Builtin("ieee9".into()),
            };
            let case = load_grid(&source, Path::new("."))?;
            let extra = extra_load.unwrap_or_else(|| vec![0.0; case.buses.len()]);
            let sol = solve_dcopf(&case, &extra)?;
            match common.format {
                Format::Pretty => print!("{}", pretty_opf(&case, &sol)),
                Format::Machine => println!("{}", to_json(&sol)),
            }
            Ok(())
        }
        Command::Route {
            network,
            origin,
            destination,
            class,
            soc,
            price,
            lmp,
            p_gas,
            candidates,
            d_search_m,
            fill_to_need,
            common,
        } => {
            if origin == destination {
                return Err(CliError::Validation(format!("origin and destination are both node {origin}")));
            }
            if !(0.0..=1.0).contains(&soc) {
                return Err(CliError::Validation(format!("soc {soc} must lie in [0, 1]")));
            }
            let (doc, net) = load_network_file(&network, MILES_PER_METER)?;
            let table = load_efficiency_table(None)?;
            let stations: Vec<ChargingStation> = doc
                .stations
                .iter()
                .map(|r| {
                    let s = ChargingStation::from(r);
                    let quoted = lmp.map_or(price, |l| offered_price(l.max(0.0), s.cpi_percent));
                    ChargingStation { offered_price: quoted, ..s }
                })
                .collect();
            let cap = table.usable_capacity(class);
            let ev = EvAgent {
                id: 0,
                class,
                battery: BatteryState::new(cap, soc * cap).expect("soc checked"),
                origin,
                destination,
            };
            let ctx = RoutingContext {
                net: &net,
                table: &table,
                prices: EnergyPrices { p_ele: price, p_gas },
                options: PlanOptions {
                    n_candidates: candidates,
                    d_search_m,
                    policy: if fill_to_need { ChargePolicy::FillToNeed } else { ChargePolicy::FillToFull },
                    opportunistic: false,
                },
            };
            let plan = ctx.plan_with_charging(&ev, &stations).map_err(|e| CliError::Validation(e.to_string()))?;
            match common.format {
                Format::Pretty => print!("{}", pretty_plan(&ev, &plan)),
                Format::Machine => println!("{}", to_json(&plan)),
            }
            Ok(())
        }
    }
}

fn summary_json(r: &ScenarioReport) -> serde_json::Value {
    serde_json::json!({
        "scenario": r.scenario,
        "status": r.status,
        "iterations": r.iterations,
        "base_case_cost": r.base_case_cost,
        "total_power_cost": r.total_power_cost,
        "total_charging_cost": r.total_charging_cost,
        "additional_cost_percent": r.additional_cost_percent,
        "counts": r.counts,
    })
}

fn pretty_run(o: &RunOutcome) -> String {
    let mut s = String::new();
    for r in &o.reports {
        s += &format!("scenario {}: {:?} after {} iteration(s)\n", r.scenario, r.status, r.iterations);
        s += &format!("  base case cost       {:>12.2} $/h\n", r.base_case_cost);
        s += &format!("  total power cost     {:>12.2} $/h\n", r.total_power_cost);
        s += &format!("  total charging cost  {:>12.2} $/h\n", r.total_charging_cost);
        s += &format!("  additional cost      {:>12.4} %\n", r.additional_cost_percent);
        s += &format!("  charged energy       {:>12.2} kWh\n", r.total_charging_kwh);
        let c = r.counts;
        s += &format!(
            "  vehicles: {} direct, {} charged, {} gasoline, {} unserved, {} stranded, {} unreachable\n",
            c.direct, c.charged, c.gasoline, c.unserved, c.stranded, c.unreachable
        );
    }
    if let Some(c) = &o.comparison {
        s += &format!("{:<26}{:>14}{:>14}{:>12}\n", "metric", "scenario I", "scenario II", "reduction");
        for row in &c.rows {
            s += &format!(
                "{:<26}{:>14.4}{:>14.4}{:>11.2}%\n",
                row.metric, row.scenario_i, row.scenario_ii, row.reduction_percent
            );
        }
    }
    s += &format!("reports written to {}\n", o.out_dir.display());
    s
}

fn pretty_opf(case: &GridCase, sol: &DcopfSolution) -> String {
    let mut s = format!("objective {:.4} $/h\n", sol.total_cost);
    for (g, p) in case.generators.iter().zip(&sol.dispatch) {
        s += &format!("  generator at bus {:>3}: {:>10.4} MW\n", g.bus, p);
    }
    for (b, l) in case.buses.iter().zip(&sol.lmp) {
        s += &format!("  bus {:>3} LMP {:>10.4} $/MWh\n", b.id, l);
    }
    for (line, f) in case.lines.iter().zip(&sol.flows) {
        s += &format!("  line {:>3}-{:<3} flow {:>10.4} MW (limit {})\n", line.from, line.to, f, line.fmax);
    }
    if !sol.binding.is_empty() {
        s += &format!("  binding: {:?}\n", sol.binding);
    }
    s
}

fn pretty_plan(ev: &EvAgent, plan: &TripPlan) -> String {
    let mut s = format!(
        "{} from {} to {} with {:.3} of {:.3} kWh\n",
        ev.class, ev.origin, ev.destination, ev.battery.energy, ev.battery.capacity
    );
    if let Some(r) = &plan.direct {
        s += &format!("  direct route {:?}, cost ${:.4}\n", r.nodes, r.total_cost);
    } else {
        s += "  no direct route on battery alone\n";
    }
    for (i, o) in plan.options.iter().enumerate() {
        let mark = if plan.selected == Some(i) { "*" } else { " " };
        s += &format!(
            " {mark} station {:>3} (region {}, {:.4} $/kWh): charge {:.3} kWh, total ${:.4}\n",
            o.station_id, o.region, o.offered_price, o.charge_kwh, o.total_cost
        );
    }
    s += &format!("  trip cost ${:.4}\n", plan.total_cost());
    s
}
