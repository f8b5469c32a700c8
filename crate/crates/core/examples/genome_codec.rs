//! Fixed-point words, genome layout and the two file encodings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tandem::fixed::{fixed_to_real, real_to_fixed};
use tandem::ga::random_genome;
use tandem::neuro::{decode_genome, encode_params, Genome};

fn main() -> tandem::Result<()> {
    for x in [1.0, -0.5, 0.00390625, 1234.56, -8388608.0] {
        let w = real_to_fixed(x);
        println!("{x:>14} -> {w:#010x} -> {}", fixed_to_real(w));
    }

    let genome = random_genome(&mut ChaCha8Rng::seed_from_u64(1));
    let params = decode_genome(&genome);
    println!("first hidden-layer weights: {:?}", &params.to_vec()[..4]);
    assert_eq!(encode_params(&params), genome);

    let dir = std::env::temp_dir().join("tandem_codec_example");
    std::fs::create_dir_all(&dir).map_err(|e| tandem::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    genome.write_binary(dir.join("g.bin"))?;
    genome.write_hex(dir.join("g.hex"), &["example genome".into()])?;
    let from_bin = Genome::read_file(dir.join("g.bin"))?;
    let from_hex = Genome::read_file(dir.join("g.hex"))?;
    println!("hex: {}", genome.to_hex());
    println!(
        "binary and hex round trips agree: {}",
        from_bin == genome && from_hex == genome
    );
    Ok(())
}
