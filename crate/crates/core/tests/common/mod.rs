#![allow(dead_code)]

use std::path::{Path, PathBuf};

use stripsim::rng::Xoshiro256;
use stripsim::RgbImage;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("data")
}

pub fn natural_images() -> Vec<(String, RgbImage)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir().join("natural"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, stripsim::load_image(&p).unwrap())
        })
        .collect()
}

pub fn noisy(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| {
        let v = rng.next_u64().to_le_bytes();
        [v[0], v[1], v[2]]
    })
    .unwrap()
}

/// Random colors on a grid of blocks whose sides are drawn from
/// `[min_block, 3 * min_block]`.
pub fn piecewise_constant(w: usize, h: usize, min_block: usize, seed: u64) -> RgbImage {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let mut cuts = |n: usize| {
        let mut edges = vec![0];
        while *edges.last().unwrap() < n {
            let step = rng.inclusive(min_block as u64, 3 * min_block as u64) as usize;
            edges.push((edges.last().unwrap() + step).min(n));
        }
        if edges.len() > 2 && n - edges[edges.len() - 2] < min_block {
            let last = edges.len() - 2;
            edges.remove(last);
        }
        edges
    };
    let rows = cuts(h);
    let cols = cuts(w);
    let colors: Vec<[u8; 3]> = (0..rows.len() * cols.len())
        .map(|_| {
            let v = rng.next_u64().to_le_bytes();
            [v[0], v[1], v[2]]
        })
        .collect();
    let block = |edges: &[usize], x: usize| edges.iter().rposition(|&e| e <= x).unwrap();
    RgbImage::from_fn(w, h, |r, c| colors[block(&rows, r) * cols.len() + block(&cols, c)]).unwrap()
}

/// Writes `count` images named `img_XXX.png` and an attributes file listing
/// them, all tagged clear/highway/night unless `tags` overrides.
pub fn synthetic_corpus(
    dir: &Path,
    count: usize,
    w: usize,
    h: usize,
    tags: impl Fn(usize) -> (String, String, String),
) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let mut records = Vec::new();
    for i in 0..count {
        let name = format!("img_{i:03}.png");
        stripsim::save_image(&noisy(w, h, 1000 + i as u64), dir.join(&name)).unwrap();
        let (wx, sc, td) = tags(i);
        records.push(serde_json::json!({
            "name": name,
            "attributes": {"weather": wx, "scene": sc, "timeofday": td},
            "labels": []
        }));
    }
    let path = dir.join("attributes.json");
    std::fs::write(&path, serde_json::to_string_pretty(&records).unwrap()).unwrap();
    path
}

pub fn same_tags(_: usize) -> (String, String, String) {
    ("clear".into(), "highway".into(), "night".into())
}
