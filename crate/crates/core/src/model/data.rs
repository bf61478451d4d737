use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, Scalar};

/// Labelled samples with features stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DataShard<T> {
    dim: usize,
    num_classes: usize,
    features: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> DataShard<T> {
    pub fn new(dim: usize, num_classes: usize, features: Vec<T>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be positive"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::LengthMismatch {
                expected: dim * labels.len(),
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(invalid(
                "labels",
                format!("label {bad} not below class count {num_classes}"),
            ));
        }
        Ok(Self {
            dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample(&self, i: usize) -> (&[T], usize) {
        (&self.features[i * self.dim..(i + 1) * self.dim], self.labels[i])
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (x, y) = self.sample(i);
            features.extend_from_slice(x);
            labels.push(y);
        }
        Self {
            dim: self.dim,
            num_classes: self.num_classes,
            features,
            labels,
        }
    }
}

/// Isotropic Gaussian class clusters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlobSpec {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    /// Standard deviation of the class centres around the origin.
    pub center_spread: f64,
    /// Within-class standard deviation.
    pub noise: f64,
    /// Constant added to every feature.
    pub offset: f64,
}

/// Balanced synthetic dataset: sample `i` has label `i % classes`, and the
/// sample order is shuffled by `seed`. Centres depend on `centers_seed` so
/// train and test splits can share the same class geometry.
pub fn blobs<T: Scalar>(spec: &BlobSpec, centers_seed: u64, seed: u64) -> Result<DataShard<T>> {
    if spec.dim == 0 || spec.classes == 0 {
        return Err(invalid("blobs", "dim and classes must be positive"));
    }
    let mut crng = ChaCha8Rng::seed_from_u64(centers_seed);
    let centers: Vec<f64> = (0..spec.classes * spec.dim)
        .map(|_| f64::standard_normal(&mut crng) * spec.center_spread)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..spec.samples).collect();
    order.shuffle(&mut rng);
    let mut features = Vec::with_capacity(spec.samples * spec.dim);
    let mut labels = Vec::with_capacity(spec.samples);
    for &i in &order {
        let c = i % spec.classes;
        for d in 0..spec.dim {
            let x = spec.offset
                + centers[c * spec.dim + d]
                + f64::standard_normal(&mut rng) * spec.noise;
            features.push(lit::<T>(x));
        }
        labels.push(c);
    }
    DataShard::new(spec.dim, spec.classes, features, labels)
}

/// Shuffles sample indices with `seed` and deals contiguous chunks of
/// `len / n_learners`; the last shard absorbs the remainder.
pub fn partition_dataset<T: Scalar>(
    data: &DataShard<T>,
    n_learners: usize,
    seed: u64,
) -> Result<Vec<DataShard<T>>> {
    if n_learners < 1 {
        return Err(invalid("n_learners", "must be at least 1"));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = data.len() / n_learners;
    Ok((0..n_learners)
        .map(|l| {
            let end = if l + 1 == n_learners {
                data.len()
            } else {
                (l + 1) * base
            };
            data.select(&order[l * base..end])
        })
        .collect())
}

/// Writes one row per sample: features then the integer label. No header.
pub fn write_csv<T: Scalar, W: Write>(data: &DataShard<T>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        let mut row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        row.push(y.to_string());
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn read_csv<T: Scalar, R: Read>(input: R, num_classes: usize) -> Result<DataShard<T>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut dim = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::Io(format!("row {}: need features and a label", line + 1)));
        }
        let d = rec.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(Error::Io(format!("row {}: inconsistent feature count", line + 1)));
        }
        for field in rec.iter().take(d) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Io(format!("row {}: bad feature `{field}`", line + 1)))?;
            features.push(lit::<T>(v));
        }
        let label: usize = rec[d]
            .parse()
            .map_err(|_| Error::Io(format!("row {}: bad label `{}`", line + 1, &rec[d])))?;
        labels.push(label);
    }
    let dim = dim.ok_or(Error::EmptyDataset)?;
    DataShard::new(dim, num_classes, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(samples: usize) -> BlobSpec {
        BlobSpec {
            samples,
            dim: 4,
            classes: 3,
            center_spread: 2.0,
            noise: 1.0,
            offset: 0.0,
        }
    }

    fn ids(shard: &DataShard<f64>) -> Vec<u64> {
        // Features are continuous draws, so the first coordinate identifies a sample.
        (0..shard.len()).map(|i| shard.sample(i).0[0].to_bits()).collect()
    }

    #[test]
    fn ten_equal_shards() {
        let data: DataShard<f64> = blobs(&spec(1000), 1, 2).unwrap();
        let shards = partition_dataset(&data, 10, 3).unwrap();
        assert_eq!(shards.len(), 10);
        assert!(shards.iter().all(|s| s.len() == 100));
    }

    #[test]
    fn remainder_goes_to_last_shard() {
        let data: DataShard<f64> = blobs(&spec(1001), 1, 2).unwrap();
        let sizes: Vec<usize> = partition_dataset(&data, 10, 3)
            .unwrap()
            .iter()
            .map(DataShard::len)
            .collect();
        assert_eq!(&sizes[..9], &[100; 9]);
        assert_eq!(sizes[9], 101);
    }

    #[test]
    fn single_learner_gets_everything() {
        let data: DataShard<f64> = blobs(&spec(50), 1, 2).unwrap();
        let shards = partition_dataset(&data, 1, 9).unwrap();
        let mut a = ids(&shards[0]);
        let mut b = ids(&data);
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn shards_are_disjoint_and_cover() {
        let data: DataShard<f64> = blobs(&spec(237), 1, 2).unwrap();
        let shards = partition_dataset(&data, 7, 5).unwrap();
        let mut all: Vec<u64> = shards.iter().flat_map(ids).collect();
        all.sort_unstable();
        let mut want = ids(&data);
        want.sort_unstable();
        assert_eq!(all, want);
    }

    #[test]
    fn zero_learners_rejected() {
        let data: DataShard<f64> = blobs(&spec(10), 1, 2).unwrap();
        assert!(partition_dataset(&data, 0, 0).is_err());
    }

    #[test]
    fn same_seed_same_shards() {
        let data: DataShard<f32> = blobs(&spec(100), 1, 2).unwrap();
        assert_eq!(
            partition_dataset(&data, 4, 11).unwrap(),
            partition_dataset(&data, 4, 11).unwrap()
        );
    }

    #[test]
    fn labels_checked() {
        assert!(DataShard::<f32>::new(1, 2, vec![0.0], vec![2]).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let data: DataShard<f32> = blobs(&spec(20), 1, 2).unwrap();
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back: DataShard<f32> = read_csv(buf.as_slice(), 3).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let text = "1.0,2.0,0\n1.0,1\n";
        assert!(read_csv::<f32, _>(text.as_bytes(), 2).is_err());
    }
}
