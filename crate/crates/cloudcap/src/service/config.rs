use std::env;
use std::net::IpAddr;
use std::path::PathBuf;
use std::time::Duration;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_WORKERS: usize = 2;
pub const DEFAULT_MAX_UPLOAD_MB: u64 = 100;

#[derive(Debug, Clone)]
pub struct Config {
    pub bind: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    pub workers: usize,
    pub max_upload_bytes: u64,
    pub tls_cert: Option<PathBuf>,
    pub tls_key: Option<PathBuf>,
    /// Replaces the built-in port-to-label table.
    pub port_table: Option<PathBuf>,
    /// Directory of static dashboard assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Pause between pipeline stages. Only useful for exercising restarts.
    pub stage_delay: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind: IpAddr::from([0, 0, 0, 0]),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("data"),
            workers: DEFAULT_WORKERS,
            max_upload_bytes: DEFAULT_MAX_UPLOAD_MB * 1024 * 1024,
            tls_cert: None,
            tls_key: None,
            port_table: None,
            static_dir: None,
            stage_delay: Duration::ZERO,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{name}={value:?}: {reason}")]
    Invalid { name: &'static str, value: String, reason: String },
    #[error("CLOUDCAP_TLS_CERT and CLOUDCAP_TLS_KEY must be set together")]
    HalfTls,
}

impl Config {
    pub fn from_env() -> Result<Config, ConfigError> {
        Config::from_lookup(|name| env::var(name).ok().filter(|v| !v.is_empty()))
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        if let Some(v) = get("CLOUDCAP_BIND") {
            c.bind = parse("CLOUDCAP_BIND", &v)?;
        }
        if let Some(v) = get("CLOUDCAP_PORT") {
            c.port = parse("CLOUDCAP_PORT", &v)?;
        }
        if let Some(v) = get("CLOUDCAP_DATA_DIR") {
            c.data_dir = PathBuf::from(v);
        }
        if let Some(v) = get("CLOUDCAP_WORKERS") {
            c.workers = parse("CLOUDCAP_WORKERS", &v)?;
            if c.workers == 0 {
                return Err(invalid("CLOUDCAP_WORKERS", &v, "must be at least 1"));
            }
        }
        if let Some(v) = get("CLOUDCAP_MAX_UPLOAD_MB") {
            let mb: u64 = parse("CLOUDCAP_MAX_UPLOAD_MB", &v)?;
            if mb == 0 {
                return Err(invalid("CLOUDCAP_MAX_UPLOAD_MB", &v, "must be at least 1"));
            }
            c.max_upload_bytes = mb * 1024 * 1024;
        }
        c.tls_cert = get("CLOUDCAP_TLS_CERT").map(PathBuf::from);
        c.tls_key = get("CLOUDCAP_TLS_KEY").map(PathBuf::from);
        if c.tls_cert.is_some() != c.tls_key.is_some() {
            return Err(ConfigError::HalfTls);
        }
        c.port_table = get("CLOUDCAP_PORT_TABLE").map(PathBuf::from);
        c.static_dir = get("CLOUDCAP_STATIC_DIR").map(PathBuf::from);
        if let Some(v) = get("CLOUDCAP_STAGE_DELAY_MS") {
            c.stage_delay = Duration::from_millis(parse("CLOUDCAP_STAGE_DELAY_MS", &v)?);
        }
        Ok(c)
    }

    pub fn tls(&self) -> Option<(&PathBuf, &PathBuf)> {
        self.tls_cert.as_ref().zip(self.tls_key.as_ref())
    }
}

fn invalid(name: &'static str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid {
        name,
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse<T: std::str::FromStr>(name: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| invalid(name, value, &e.to_string()))
}
