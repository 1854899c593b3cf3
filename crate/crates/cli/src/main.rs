use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ontomerge::advisor::Advisor;
use ontomerge::engine::{MergeSession, SessionConfig, SuffixPolicy};
use ontomerge::ingest::{lift_xml, LiftConfig};
use ontomerge::io::{read_owl, write_canonical, write_owl, MergeScript};
use ontomerge::matcher::{initial_matches, MatchConfig};
use ontomerge::Ontology;

#[derive(Parser)]
#[command(name = "ontomerge", version, about = "Lift XML sources into ontologies and merge them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Owl,
    Canonical,
}

#[derive(Subcommand)]
enum Command {
    /// Lift XML documents sharing one root element into an OWL ontology.
    Lift {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Ontology name.
        #[arg(long)]
        name: String,
        /// Take the structure from this XML Schema instead of inferring it.
        #[arg(long)]
        xsd: Option<PathBuf>,
        /// Lift element occurrences as instances.
        #[arg(long)]
        with_instances: bool,
        /// Prefix of object-property names.
        #[arg(long, default_value = "has")]
        prefix: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "owl")]
        format: Format,
    },
    /// List the initial merge suggestions between two ontologies.
    Match {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Merge sources by replaying a script or by accepting suggestions.
    Merge {
        /// Merge script to replay.
        #[arg(long, conflicts_with = "auto")]
        script: Option<PathBuf>,
        /// Accept suggestions until none remain, then copy what is left.
        #[arg(long, requires = "sources")]
        auto: bool,
        /// Source OWL files (with --auto).
        sources: Vec<PathBuf>,
        #[arg(long)]
        preferred: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        suffix_policy: Option<SuffixPolicy>,
        #[arg(long)]
        merged_name: Option<String>,
        /// Fail when conflicts remain after an automatic merge.
        #[arg(long)]
        strict: bool,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "owl")]
        format: Format,
    },
    /// Convert an OWL file to the canonical text form or re-serialize it.
    Export {
        file: PathBuf,
        /// Canonical text (the default).
        #[arg(long, conflicts_with = "owl")]
        canonical: bool,
        #[arg(long)]
        owl: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory for session snapshots; in-memory when omitted.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Lift { files, name, xsd, with_instances, prefix, output, format } => {
            let texts = files.iter().map(|f| read(f)).collect::<Result<Vec<_>>>()?;
            let xsd = xsd.as_deref().map(read).transpose()?;
            let config = LiftConfig { object_property_prefix: prefix, with_instances, ..LiftConfig::default() };
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let lifted = lift_xml(&name, &refs, xsd.as_deref(), &config).context("lifting failed")?;
            for w in &lifted.warnings {
                eprintln!("warning: {w}");
            }
            emit(output.as_deref(), &render(&lifted.ontology, format))
        }
        Command::Match { a, b, threshold } => {
            let (a, b) = (load_owl(&a)?, load_owl(&b)?);
            let mut config = MatchConfig::default();
            if let Some(t) = threshold {
                config.threshold = t;
            }
            config.validate().context("invalid threshold")?;
            let mut out = String::new();
            for s in initial_matches(&a, &b, &config) {
                out.push_str(&format!("{:.3}\t{}\n", s.score, s.operation));
            }
            emit(None, &out)
        }
        Command::Merge { script, auto, sources, preferred, threshold, suffix_policy, merged_name, strict, output, format } => {
            let merged = if let Some(path) = script {
                if !sources.is_empty() {
                    bail!("sources come from the script; do not list them with --script");
                }
                let mut script = MergeScript::parse(&read(&path)?).with_context(|| format!("in {}", path.display()))?;
                let c = &mut script.config;
                c.preferred = preferred.or(c.preferred.take());
                c.threshold = threshold.or(c.threshold);
                c.suffix_policy = suffix_policy.or(c.suffix_policy);
                c.merged = merged_name.or(c.merged.take());
                let dir = path.parent().unwrap_or(Path::new("."));
                let advisor = script.replay(dir).with_context(|| format!("replaying {}", path.display()))?;
                advisor.session().merged().clone()
            } else if auto {
                let sources = sources.iter().map(|p| load_owl(p)).collect::<Result<Vec<_>>>()?;
                let mut config = SessionConfig { preferred, ..SessionConfig::default() };
                if let Some(p) = suffix_policy {
                    config.suffix_policy = p;
                }
                if let Some(m) = merged_name {
                    config.merged_name = m;
                }
                let mut matching = MatchConfig::default();
                if let Some(t) = threshold {
                    matching.threshold = t;
                }
                let session = MergeSession::new(sources, config)?;
                let mut advisor = Advisor::new(session, matching)?;
                let report = advisor.auto_merge(strict)?;
                eprintln!("{} merges, {} copies", report.merges, report.copies);
                for (op, err) in &report.skipped {
                    eprintln!("skipped `{op}`: {err}");
                }
                for c in &report.unresolved {
                    eprintln!("unresolved {}: {}", c.kind, c.description);
                }
                advisor.session().merged().clone()
            } else {
                bail!("give either --script <file> or --auto <sources...>");
            };
            write_atomically(&output, &render(&merged, format))
        }
        Command::Export { file, owl, output, .. } => {
            let o = load_owl(&file)?;
            let format = if owl { Format::Owl } else { Format::Canonical };
            emit(output.as_deref(), &render(&o, format))
        }
        Command::Serve { port, host, data_dir } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime
                .block_on(ontomerge_service::serve(SocketAddr::new(host, port), data_dir))
                .map_err(|e| anyhow::anyhow!(e))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_owl(path: &Path) -> Result<Ontology> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("source");
    let doc = read_owl(&read(path)?, stem).with_context(|| format!("in {}", path.display()))?;
    for w in &doc.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(doc.ontology)
}

fn render(o: &Ontology, format: Format) -> String {
    match format {
        Format::Owl => write_owl(o),
        Format::Canonical => write_canonical(o),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => write_atomically(path, text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Writes through a sibling temporary file so a failed run leaves no partial output.
fn write_atomically(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
}
