mod common;

use neurotext::corpus::{load_corpus, MIN_FIXATION_MS};
use neurotext::signal::{extract_corpus, extract_synthetic, Band, ExtractOptions, MissingEeg};
use rustfft::FftPlanner;

#[test]
fn written_corpus_reads_back_unchanged() {
    let synth = common::tiny_corpus(12, 2.0, 5);
    let dir = tempfile::tempdir().unwrap();
    synth.write(dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();

    assert_eq!(loaded.sentences, synth.plain_sentences());
    assert_eq!(loaded.subjects, synth.subjects());
    let mut planner = FftPlanner::new();
    let mut dropped = 0;
    for (i, item) in synth.sentences.iter().enumerate() {
        for (j, subj) in synth.subjects().iter().enumerate() {
            let all = synth.fixations(i, j);
            let kept: Vec<_> = all.iter().filter(|f| f.duration_ms >= MIN_FIXATION_MS).cloned().collect();
            dropped += all.len() - kept.len();
            assert_eq!(loaded.fixations_for(&item.sentence.id, subj), kept.as_slice());
            let rec = loaded.recording(&item.sentence.id, subj).unwrap().unwrap();
            assert_eq!(rec, synth.recording(i, j, &all, &mut planner));
        }
    }
    assert_eq!(loaded.report.fixations_dropped_short, dropped);
}

#[test]
fn disk_and_memory_extraction_agree() {
    let synth = common::tiny_corpus(10, 2.0, 9);
    let dir = tempfile::tempdir().unwrap();
    synth.write(dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    let bands = [Band::Gamma, Band::Broadband];
    let opts = ExtractOptions::default();
    let disk = extract_corpus(&loaded, &bands, &opts, MissingEeg::Error, 1).unwrap();
    let mem = extract_synthetic(&synth, &bands, &opts, 2).unwrap();
    assert_eq!(disk.sets, mem.sets);
    assert!(disk.missing_eeg.is_empty());
}

#[test]
fn missing_recording_policy() {
    let synth = common::tiny_corpus(10, 2.0, 9);
    let dir = tempfile::tempdir().unwrap();
    synth.write(dir.path()).unwrap();
    let loaded = load_corpus(dir.path()).unwrap();
    let gone = loaded.eeg_path(&loaded.sentences[3].id, &loaded.subjects[1]);
    std::fs::remove_file(&gone).unwrap();
    let opts = ExtractOptions::default();
    let err = extract_corpus(&loaded, &[Band::Gamma], &opts, MissingEeg::Error, 1).unwrap_err();
    assert!(err.to_string().contains(&*gone.to_string_lossy()), "{err}");
    let table = extract_corpus(&loaded, &[Band::Gamma], &opts, MissingEeg::Warn, 1).unwrap();
    assert_eq!(table.missing_eeg, vec![(loaded.sentences[3].id.clone(), loaded.subjects[1].clone())]);
}
