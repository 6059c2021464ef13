use phsurf::surface::{self, h_cr, SurfacePatch};
use phsurf::variational::Deformation;

fn main() {
    let m = phsurf::models::from_spec("disk-bundle").unwrap();
    let s = surface::from_spec(&m, "plane:0,1,0").unwrap();
    let rect = s.rect().unwrap();
    let d = Deformation::random(rect, [None, None], 0);
    let delta = 1e-3;
    // Displace along e2 by reconstructing the frame pointwise.
    let def = SurfacePatch::immersion(
        "probe",
        {
            let m2 = phsurf::models::from_spec("disk-bundle").unwrap();
            let s2 = surface::from_spec(&m2, "plane:0,1,0").unwrap();
            Box::new(move |u: f64, v: f64| {
                let p = match s2.chart_point(&m2, u, v) {
                    Ok(p) => p,
                    Err(_) => return [f64::NAN; 3],
                };
                let data = surface::frame_point_data(&m2, &s2, &p).unwrap();
                let e2 = data.e2;
                let fv = (d.f)(u, v);
                [
                    p.coords[0] + delta * fv * e2.comps[0],
                    p.coords[1] + delta * fv * e2.comps[1],
                    p.coords[2] + delta * fv * e2.comps[2],
                ]
            })
        },
        None,
        rect,
        [false, false],
    )
    .with_param_step(0.002);
    let mut errs: Vec<(f64, f64, String)> = Vec::new();
    let mut n = 0;
    for (u, v) in def.midpoint_grid(128, 128).unwrap() {
        n += 1;
        let p = match def.chart_point(&m, u, v) {
            Ok(p) => p,
            Err(e) => { errs.push((u, v, format!("point: {e}"))); continue; }
        };
        if let Err(e) = h_cr(&m, &def, &p) {
            errs.push((u, v, format!("hcr: {e}")));
        }
    }
    println!("errors {} / {}", errs.len(), n);
    for (u, v, e) in errs.iter().take(8) {
        println!("  ({u:.4}, {v:.4}): {e}");
    }
}
