//! Opens an on-disk store, fills it through the service and audits it.

use std::sync::Arc;

use aicofe::{build_gateway, fixtures, Service, Settings};
use aicofe_gateway::mock_descriptors;
use aicofe_store::{Collection, MediaKind, Store};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let store = Arc::new(Store::open_dir(dir.path())?);
    let gateway = Arc::new(build_gateway(mock_descriptors(0), None)?);
    let svc = Service::new(store.clone(), gateway, Settings::default());
    fixtures::seed_base(&svc)?;
    fixtures::seed_evaluations(&svc)?;
    let teacher = svc.user(&fixtures::TEACHER.into())?;
    svc.generate(&teacher, &fixtures::INSTANCE.into()).await?;
    svc.upload_recording(&teacher, &fixtures::INSTANCE.into(), MediaKind::Video, b"not really a video", "mp4")?;

    for c in Collection::ALL {
        println!("{:<20} {} document(s)", c.as_str(), store.docs.scan_raw(c)?.len());
    }
    let report = store.audit()?;
    println!("\naudit clean: {} ({} documents, {} recordings)", report.clean, report.documents_scanned, report.recordings_checked);

    // Tampering with a blob is caught by the checksum.
    let rec = store.db.read(|r| r.active_recording(&fixtures::INSTANCE.into()))?.expect("recording");
    std::fs::write(store.files.path(&rec.rel_path)?, b"tampered")?;
    let report = store.audit()?;
    println!("after tampering clean: {} problems: {:?}", report.clean, report.file_problems);
    Ok(())
}
