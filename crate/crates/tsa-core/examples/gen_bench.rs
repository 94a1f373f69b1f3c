fn main() {
    let case = tsa_core::gridsim::CaseFile::load(std::path::Path::new("cases/nine_bus.toml")).unwrap();
    let t0 = std::time::Instant::now();
    let ds = tsa_core::gridsim::generate_dataset(&case, None, None).unwrap();
    println!("generated {} samples in {:?}", ds.samples.len(), t0.elapsed());
    println!("train {} test {}", ds.train_idx.len(), ds.test_idx.len());
    let stable = ds.samples.iter().filter(|s| s.label == 1).count();
    println!("stable {} unstable {}", stable, ds.samples.len() - stable);
    let rows: Vec<usize> = ds.samples.iter().map(|s| s.voltages.nrows()).collect();
    println!("rows min {} max {}", rows.iter().min().unwrap(), rows.iter().max().unwrap());
    let post: Vec<usize> = ds.samples.iter().map(|s| s.post_rows()).collect();
    println!("post rows min {}", post.iter().min().unwrap());
    // measured-sample stats per class to eyeball separability
    for label in [1u8, 0u8] {
        let mut mins = f64::INFINITY;
        let mut maxs: f64 = 0.0;
        let mut mean = 0.0;
        let mut n = 0;
        for s in ds.samples.iter().filter(|s| s.label == label) {
            for v in s.voltages.row(s.measured_row) {
                mins = mins.min(*v); maxs = maxs.max(*v); mean += v; n += 1;
            }
        }
        println!("label {}: measured-sample v in [{:.3}, {:.3}], mean {:.3}", label, mins, maxs, mean / n as f64);
    }
}
