//! Layers a JSON override over the desk profile and validates it.
use rsma_ris::SystemConfig;

fn main() -> rsma_ris::Result<()> {
    let json = r#"{ "num_users": 3, "max_power_db": 20, "csi_error_level": 0.05 }"#;
    let config = SystemConfig::from_json(json, &SystemConfig::desk())?;
    println!("{}", serde_json::to_string_pretty(&config)?);
    let bad = SystemConfig::from_json(r#"{ "num_users": 40 }"#, &SystemConfig::desk());
    println!("40 users on 32 elements: {}", bad.unwrap_err());
    Ok(())
}
