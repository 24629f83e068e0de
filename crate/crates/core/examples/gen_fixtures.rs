//! Regenerates the shipped fixture sets under `fixtures/`.
//!
//!     cargo run -p greenspace-core --example gen_fixtures

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use greenspace::synth::{TradeWorld, TradeWorldConfig};

const SYNTHETIC_SEED: u64 = 20_170_207;

fn write(path: &Path, text: &str) -> std::io::Result<()> {
    fs::write(path, text)
}

fn hand_fixture(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut trade = String::from("year,reporter_iso,hs6,trade_value_usd\n");
    let flows = [
        (2007, "AAA", ["000001", "000002"]),
        (2007, "BBB", ["000002", "000003"]),
        (2007, "CCC", ["000003", "000004"]),
        (2017, "AAA", ["000001", "000004"]),
        (2017, "BBB", ["000002", "000003"]),
        (2017, "CCC", ["000002", "000003"]),
    ];
    for (year, country, products) in flows {
        for p in products {
            trade.push_str(&format!("{year},{country},{p},10\n"));
        }
    }
    write(&dir.join("trade.csv"), &trade)?;
    write(&dir.join("green.txt"), "000002\n000003\n000004\n")?;
    write(
        &dir.join("indicators.csv"),
        "country_iso3,indicator_name,value\nAAA,env_tech_per_capita,1\nBBB,env_tech_per_capita,2\nCCC,env_tech_per_capita,4\n",
    )?;
    write(
        &dir.join("greenspace.toml"),
        "t0 = 2007\nt1 = 2017\nseed = 7\ntrade = \"trade.csv\"\ngreen = \"green.txt\"\nindicators = \"indicators.csv\"\n",
    )
}

fn synthetic_fixture(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let world = TradeWorld::generate(TradeWorldConfig::default(), SYNTHETIC_SEED);
    world.write_trade_csv(BufWriter::new(File::create(dir.join("trade.csv"))?))?;
    let mut green = BufWriter::new(File::create(dir.join("green.txt"))?);
    world.write_green_list(&mut green)?;
    green.flush()?;
    world.write_indicator_csv(BufWriter::new(File::create(dir.join("indicators.csv"))?))?;
    write(
        &dir.join("greenspace.toml"),
        "t0 = 2007\nt1 = 2017\nseed = 42\ncountries = [\"AAB\"]\nfull_table = true\n\
         trade = \"trade.csv\"\ngreen = \"green.txt\"\nindicators = \"indicators.csv\"\n",
    )
}

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    hand_fixture(&root.join("f1f2"))?;
    synthetic_fixture(&root.join("synthetic"))?;
    println!("fixtures written to {}", root.display());
    Ok(())
}
