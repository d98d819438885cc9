use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use facevc_pipeline::{checkpoint, config::RunConfig, corpus, evalcmd, idfv, infer, interp, train};
use facevc_pipeline::{PipelineError, Result};

#[derive(Parser)]
#[command(
    name = "facevc",
    about = "Face-driven voice conversion: synthetic data, training, inference and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonOpts {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired face/voice corpus.
    SynthData {
        #[command(flatten)]
        common: CommonOpts,
        /// Output corpus directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a corpus; writes a checkpoint and a per-step loss CSV.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Corpus directory.
        corpus: PathBuf,
        /// Output directory for checkpoint and logs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a source utterance to the voice of a face.
    Infer {
        /// Checkpoint directory.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Face frames (.idfv, [T x d_face]).
        face: PathBuf,
        /// Source waveform (.wav).
        source: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Blend two faces and emit the speaker code (plus audio with --source).
    Interp {
        #[arg(long)]
        checkpoint: PathBuf,
        face_a: PathBuf,
        face_b: PathBuf,
        /// Blend weight toward face B, in [0, 1].
        #[arg(long)]
        alpha: f32,
        /// Optional source waveform to render with the blended voice.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score held-out conversions, or pre-computed embedding files.
    Eval {
        /// Checkpoint directory (corpus mode).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Corpus directory (corpus mode).
        corpus: Option<PathBuf>,
        /// Generated embeddings .idfv (file mode).
        #[arg(long)]
        gen_embeddings: Option<PathBuf>,
        /// Reference embeddings .idfv (file mode).
        #[arg(long)]
        ref_embeddings: Option<PathBuf>,
        /// set,row,speaker CSV (file mode).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump a mel .idfv as CSV rows.
    ExportMelCsv {
        input: PathBuf,
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { common, out } => {
            let cfg = common.load()?;
            let corpus = corpus::synth_corpus(&out, &cfg)?;
            println!(
                "wrote {} utterances for {} speakers to {}",
                corpus.utterances.len(),
                corpus.speakers,
                out.display()
            );
        }
        Command::Train {
            common,
            corpus,
            out,
        } => {
            let cfg = common.load()?;
            let report = train::train(&cfg, &corpus, &out)?;
            println!(
                "trained {} steps; checkpoint at {}, losses at {}",
                report.steps,
                report.checkpoint_dir.display(),
                report.csv_path.display()
            );
        }
        Command::Infer {
            checkpoint: ckpt_dir,
            face,
            source,
            out,
        } => {
            let ckpt = checkpoint::load(&ckpt_dir)?;
            let result = infer::infer(&ckpt, &face, &source, &out)?;
            println!(
                "wrote {} and {}",
                result.mel_path.display(),
                result.wav_path.display()
            );
        }
        Command::Interp {
            checkpoint: ckpt_dir,
            face_a,
            face_b,
            alpha,
            source,
            out,
        } => {
            let ckpt = checkpoint::load(&ckpt_dir)?;
            let (_, written) =
                interp::interp(&ckpt, &face_a, &face_b, alpha, source.as_deref(), &out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
        Command::Eval {
            checkpoint: ckpt_dir,
            corpus,
            gen_embeddings,
            ref_embeddings,
            labels,
            out,
        } => {
            let report = match (ckpt_dir, corpus, gen_embeddings, ref_embeddings, labels) {
                (Some(ck), Some(corpus), None, None, None) => {
                    let ckpt = checkpoint::load(&ck)?;
                    evalcmd::evaluate_corpus(&ckpt, &corpus, &out)?
                }
                (None, None, Some(g), Some(r), Some(l)) => {
                    evalcmd::evaluate_embeddings(&g, &r, &l, &out)?
                }
                _ => {
                    return Err(PipelineError::Validation(
                        "eval takes either --checkpoint with a corpus, or \
                         --gen-embeddings/--ref-embeddings/--labels"
                            .into(),
                    ))
                }
            };
            print!("{}", report.serialize());
        }
        Command::ExportMelCsv { input, output } => {
            let t = idfv::read_tensor(&input)?;
            let (rows, cols) = t.dims2();
            let mut csv = String::new();
            for r in 0..rows {
                let row: Vec<String> = t.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .map(|v| v.to_string())
                    .collect();
                csv.push_str(&row.join(","));
                csv.push('\n');
            }
            std::fs::write(&output, csv)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
