//! Space registration: four BSs 50 m from a sensing unit each pick a beam
//! to cover it, and the fused echo power gain is compared across beam types.

use isac_coop_sim::beam::{fused_gain_from_efficiencies, register_beam, required_width, BeamSynthesis, SensingArea};
use isac_coop_sim::{BsSite, SiteRole};

fn main() -> isac_coop_sim::Result<()> {
    let d = 35.355_339_059_327_38;
    let sites: Vec<BsSite> = [[d, d], [-d, d], [-d, -d], [d, -d]]
        .iter()
        .enumerate()
        .map(|(i, p)| BsSite {
            id: i as u32,
            position_m: [p[0], p[1], 0.0],
            array_rows: 32,
            array_cols: 32,
            element_spacing_wavelengths: 0.5,
            role: SiteRole::TxRx,
        })
        .collect();

    println!("side_m  width_deg  perfect  baba   conventional");
    for side_m in [1.0, 2.0, 3.0, 5.0, 8.0] {
        let area = SensingArea { center_m: [0.0; 3], side_m };
        let width = required_width(&area, sites[0].position_m)?;
        let gain = |synthesis| -> isac_coop_sim::Result<f64> {
            let effs = sites
                .iter()
                .map(|s| register_beam(s, &area, synthesis).map(|(_, e)| e))
                .collect::<isac_coop_sim::Result<Vec<_>>>()?;
            fused_gain_from_efficiencies(&effs)
        };
        let perfect = fused_gain_from_efficiencies(&[1.0; 4])?;
        println!(
            "{side_m:>6.1}  {:>9.3}  {perfect:>7.3}  {:.3}  {:.3}",
            width.to_degrees(),
            gain(BeamSynthesis::Baba)?,
            gain(BeamSynthesis::Conventional)?
        );
    }
    Ok(())
}
