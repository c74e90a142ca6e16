//! Comment cleanup, relevance screening and anonymization.

use aicofe::fixtures;
use aicofe_core::preprocess::{anonymize, deanonymize, find_residuals, normalize_comment, screen_relevance, RedactionMap, Roster};

fn main() {
    let rubric = fixtures::rubric();
    let roster = Roster::from_users(&fixtures::users());
    let mut map = RedactionMap::new(fixtures::INSTANCE.into());

    let raw = [
        ("voice", "Lucía\u{200B} habló con una  voz\tclara."),
        ("structure", "La conclusión llegó tarde;\r\nJosé Núñez lo comentó."),
        ("slides", "Me gustó mucho."),
        ("slides", "Escribid a s1@uni.example si queréis las diapositivas."),
    ];
    for (item_id, text) in raw {
        let item = rubric.item(&item_id.into()).expect("fixture item");
        let clean = normalize_comment(text);
        let verdict = screen_relevance(&clean, item);
        let anon = anonymize(&clean, &roster, &mut map);
        println!("[{item_id}] {clean:?}");
        println!("    relevant: {} {:?}", verdict.relevant, verdict.matched_terms);
        println!("    outbound: {anon}");
        assert!(find_residuals(&anon, &roster).is_empty());
        assert_eq!(deanonymize(&anon, &map).text, clean);
    }
    println!("\nredaction map {} holds {} entries", map.id(), map.entries.len());
}
