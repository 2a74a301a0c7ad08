// Probit model for the probability that a US domestic flight is diverted,
// fitted by mBR and mJPL with both IWLS variants.
//
//     cargo run --release --example flights_probit -- 2000.csv airports.csv
//
// The first file is the year-2000 on-time performance table from the 2009
// ASA Data Expo (5,683,047 flights, decompressed), the second the airports
// table distributed with it. The raw records are streamed into a numeric
// design file with 37 columns (intercept; month, weekday and carrier dummies
// with January, Monday and AQ as references; scheduled departure and arrival
// times; distance; 3-d coordinates of both airports), which is then fitted
// in chunks of 10,000 rows.
//
// Without arguments a small synthetic data set in the same raw format is
// generated and used instead.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bigglm::{fit, ChunkSchema, CsvSource, Estimator, FamilyLink, FitConfig, Link, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CARRIERS: [&str; 11] = [
    "AA", "AQ", "AS", "CO", "DL", "HP", "NW", "TW", "UA", "US", "WN",
];
const REFERENCE_CARRIER: &str = "AQ";

fn design_header() -> Vec<String> {
    let mut h = vec!["diverted".to_string()];
    h.extend((2..=12).map(|m| format!("month{m}")));
    h.extend((2..=7).map(|d| format!("weekday{d}")));
    h.extend(
        CARRIERS
            .iter()
            .filter(|c| **c != REFERENCE_CARRIER)
            .map(|c| format!("carrier{c}")),
    );
    h.extend(
        [
            "crs_dep", "crs_arr", "distance", "dep_x", "dep_y", "dep_z", "arr_x", "arr_y", "arr_z",
        ]
        .map(String::from),
    );
    h
}

fn read_airports(path: &Path) -> Result<HashMap<String, [f64; 3]>, Box<dyn std::error::Error>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(format!("airports file lacks {name}"))
    };
    let (iata, lat, lon) = (col("iata")?, col("lat")?, col("long")?);
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Ok(la), Ok(lo)) = (
            rec[lat].trim().parse::<f64>(),
            rec[lon].trim().parse::<f64>(),
        ) else {
            continue;
        };
        let (la, lo) = (la.to_radians(), lo.to_radians());
        out.insert(
            rec[iata].trim().to_string(),
            [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()],
        );
    }
    Ok(out)
}

/// Streams the raw flight records into a numeric design CSV. Returns
/// (rows written, rows skipped).
fn prepare_design(
    flights: &Path,
    airports: &Path,
    out: &Path,
) -> Result<(usize, usize), Box<dyn std::error::Error>> {
    let coords = read_airports(airports)?;
    let mut rdr = csv::Reader::from_path(flights)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(format!("flights file lacks {name}"))
    };
    let idx = [
        col("Month")?,
        col("DayOfWeek")?,
        col("UniqueCarrier")?,
        col("CRSDepTime")?,
        col("CRSArrTime")?,
        col("Distance")?,
        col("Origin")?,
        col("Dest")?,
        col("Diverted")?,
    ];
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "{}", design_header().join(","))?;
    let (mut written, mut skipped) = (0, 0);
    let mut rec = csv::StringRecord::new();
    let mut row: Vec<f64> = Vec::with_capacity(40);
    while rdr.read_record(&mut rec)? {
        let num = |k: usize| rec[idx[k]].trim().parse::<f64>().ok();
        let (Some(month), Some(wday), Some(dep), Some(arr), Some(dist), Some(div)) =
            (num(0), num(1), num(3), num(4), num(5), num(8))
        else {
            skipped += 1;
            continue;
        };
        let carrier = rec[idx[2]].trim();
        let (Some(o), Some(d)) = (
            coords.get(rec[idx[6]].trim()),
            coords.get(rec[idx[7]].trim()),
        ) else {
            skipped += 1;
            continue;
        };
        if !CARRIERS.contains(&carrier) {
            skipped += 1;
            continue;
        }
        row.clear();
        row.push(div);
        row.extend((2..=12).map(|m| f64::from(month as i32 == m)));
        row.extend((2..=7).map(|d| f64::from(wday as i32 == d)));
        row.extend(
            CARRIERS
                .iter()
                .filter(|c| **c != REFERENCE_CARRIER)
                .map(|c| f64::from(*c == carrier)),
        );
        row.extend([dep, arr, dist]);
        row.extend(o);
        row.extend(d);
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
        written += 1;
    }
    w.flush()?;
    Ok((written, skipped))
}

/// Writes raw-format flights and airports files with rare diversions.
fn synthesize(dir: &Path, n: usize) -> std::io::Result<(PathBuf, PathBuf)> {
    let airports = [
        ("ATL", 33.64, -84.43),
        ("ORD", 41.98, -87.90),
        ("DFW", 32.90, -97.04),
        ("LAX", 33.94, -118.41),
        ("JFK", 40.64, -73.78),
        ("SEA", 47.45, -122.31),
        ("DEN", 39.86, -104.67),
        ("MIA", 25.79, -80.29),
    ];
    let ap = dir.join("airports.csv");
    let mut w = BufWriter::new(File::create(&ap)?);
    writeln!(
        w,
        "\"iata\",\"airport\",\"city\",\"state\",\"country\",\"lat\",\"long\""
    )?;
    for (code, lat, lon) in airports {
        writeln!(
            w,
            "\"{code}\",\"{code} Intl\",\"City\",\"ST\",\"USA\",{lat},{lon}"
        )?;
    }
    w.flush()?;

    let fl = dir.join("flights.csv");
    let mut w = BufWriter::new(File::create(&fl)?);
    writeln!(w, "Year,Month,DayofMonth,DayOfWeek,CRSDepTime,CRSArrTime,UniqueCarrier,Origin,Dest,Distance,Diverted")?;
    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    for _ in 0..n {
        let month = rng.random_range(1..=12);
        let wday = rng.random_range(1..=7);
        let carrier = CARRIERS[rng.random_range(0..CARRIERS.len())];
        let o = rng.random_range(0..airports.len());
        let d = (o + rng.random_range(1..airports.len())) % airports.len();
        let dep = rng.random_range(6..23) * 100 + rng.random_range(0..60);
        let arr = (dep + 300) % 2400;
        let dist = rng.random_range(300..2500);
        let eta = -2.6 + 0.0002 * dist as f64 + if month == 12 { 0.3 } else { 0.0 };
        let prob = 0.5 * statrs::function::erf::erfc(-eta / std::f64::consts::SQRT_2);
        let div = u8::from(rng.random::<f64>() < prob);
        writeln!(
            w,
            "2000,{month},1,{wday},{dep},{arr},{carrier},{},{},{dist},{div}",
            airports[o].0, airports[d].0
        )?;
    }
    w.flush()?;
    Ok((fl, ap))
}

fn run(inputs: Option<(PathBuf, PathBuf)>) -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("bigglm-flights");
    std::fs::create_dir_all(&dir)?;
    let (flights, airports) = match inputs {
        Some(paths) => paths,
        None => {
            println!("no input files given; using 20,000 synthetic flights");
            synthesize(&dir, 20_000)?
        }
    };
    let design = dir.join("design.csv");
    let clock = Instant::now();
    let (n, skipped) = prepare_design(&flights, &airports, &design)?;
    println!(
        "design: {n} rows, {skipped} skipped, {:.1}s",
        clock.elapsed().as_secs_f64()
    );

    let header = design_header();
    let schema = ChunkSchema::new(header[0].clone(), header[1..].iter().cloned());
    let fl = FamilyLink::binomial(Link::Probit)?;
    let mut fits = Vec::new();
    for (est, variant) in [
        (Estimator::Mbr, Variant::OnePass),
        (Estimator::Mbr, Variant::TwoPass),
        (Estimator::Mjpl, Variant::OnePass),
        (Estimator::Mjpl, Variant::TwoPass),
    ] {
        let mut source = CsvSource::open(&design, schema.clone(), 10_000)?;
        let clock = Instant::now();
        let res = fit(&FitConfig::new(est).variant(variant), &mut source, &fl)?;
        println!(
            "{est} {variant}: {} iterations, {:.1}s",
            res.iterations,
            clock.elapsed().as_secs_f64()
        );
        fits.push(res);
    }

    // intercept and carrier rows, estimates over standard errors
    let rows: Vec<usize> = std::iter::once(0)
        .chain((0..header.len()).filter(|&j| header[j].starts_with("carrier")))
        .collect();
    println!(
        "{:<12} {:>9} {:>9} {:>9} {:>9}",
        "", "mBR 1p", "mBR 2p", "mJPL 1p", "mJPL 2p"
    );
    for j in rows {
        let name = &fits[0].names[j];
        let est: Vec<String> = fits.iter().map(|f| format!("{:>9.2}", f.beta[j])).collect();
        let se: Vec<String> = fits
            .iter()
            .map(|f| format!("{:>9}", format!("({:.2})", f.se[j])))
            .collect();
        println!("{name:<12} {}", est.join(" "));
        println!("{:<12} {}", "", se.join(" "));
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    let inputs = match args.as_slice() {
        [] => None,
        [f, a] => Some((f.clone(), a.clone())),
        _ => return Err("usage: flights_probit [FLIGHTS.csv AIRPORTS.csv]".into()),
    };
    run(inputs)
}
