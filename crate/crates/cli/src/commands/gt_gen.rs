use objsal_core::gtgen::render_ground_truth;
use objsal_core::ingest::{encode_pfm, load_fixations};
use objsal_core::Error;

use crate::output::write_atomic;
use crate::{load_config, Failure, GtGenArgs};

/// Frame ids become file names, so they must not climb out of the output
/// directory.
fn check_frame_id(id: &str) -> Result<(), Failure> {
    let bad = id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']);
    if bad {
        return Err(Failure::Core(Error::InvalidValue(format!(
            "frame id {id:?} cannot be used as a file name"
        ))));
    }
    Ok(())
}

pub fn run(args: &GtGenArgs) -> Result<(), Failure> {
    let mut config = load_config(args.config.as_ref())?;
    if let Some(w) = args.fixation_window {
        config.gtgen.fixation_window = w;
    }
    if let Some(p) = args.pixels_per_degree {
        config.gtgen.pixels_per_degree = Some(p);
    }
    let gtgen = config.gtgen.resolve()?;
    if args.width == 0 || args.height == 0 {
        return Err(Failure::Core(Error::Shape(format!(
            "output size {}x{} is empty",
            args.width, args.height
        ))));
    }

    let table = load_fixations(&args.fixations)?;
    let mut written = 0usize;
    let mut skipped = 0usize;
    for set in table.frames() {
        check_frame_id(&set.frame_id)?;
        if set.is_empty() {
            skipped += 1;
            continue;
        }
        let map = render_ground_truth(set, &gtgen, args.width, args.height)?;
        let path = args.output.join(format!("{}.pfm", set.frame_id));
        write_atomic(&path, &encode_pfm(&map))?;
        written += 1;
    }
    eprintln!(
        "gt-gen: wrote {written} maps to {}, skipped {skipped} frames without fixations",
        args.output.display()
    );
    if written == 0 {
        return Err(Failure::Input(format!(
            "{} holds no frame with fixations",
            args.fixations.display()
        )));
    }
    Ok(())
}
