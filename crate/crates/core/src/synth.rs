//! Seeded generator of realistic organisational mailboxes.
//!
//! Mail is produced by senders grouped into domains. Domains fix the
//! transport path (relays, address ranges, time zone, message-id style and,
//! for some, archive headers or mailing-list headers); senders fix their
//! client software, signature, greeting, usual correspondents and topics.
//! Per-message noise (client drift, occasional strangers as recipients,
//! unique ids and timestamps) keeps the data from being trivially separable.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, RawEmail};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeskConfig {
    pub domains: usize,
    pub min_senders_per_domain: usize,
    pub max_senders_per_domain: usize,
    pub emails: usize,
    pub seed: u64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            domains: 6,
            min_senders_per_domain: 3,
            max_senders_per_domain: 6,
            emails: 600,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DomainStyle {
    /// corporate Exchange shop with archive headers (X-From, X-Folder, ...)
    Archive,
    /// corporate, plain headers
    Corporate,
    /// university / open-source mailing list traffic
    List,
}

struct Domain {
    name: String,
    org: String,
    style: DomainStyle,
    relays: Vec<String>,
    net: (u8, u8),
    tz: (&'static str, &'static str),
    standard_client: usize,
    staff: Vec<String>,
    list_id: String,
}

struct Sender {
    domain: usize,
    first: String,
    last: String,
    address: String,
    title: &'static str,
    client: usize,
    signature_rate: f64,
    greeting: usize,
    contacts: Vec<String>,
    topics: Vec<usize>,
    priority: Option<&'static str>,
    ip: String,
    workday: (u32, u32),
    cc_rate: f64,
}

const DOMAIN_NAMES: [(&str, &str); 8] = [
    ("northwind-energy.com", "Northwind Energy"),
    ("bluefin-capital.com", "Bluefin Capital"),
    ("kestrel-labs.org", "Kestrel Labs"),
    ("harbor.edu", "Harbor University"),
    ("lists.opensrc.net", "Open Source Users Group"),
    ("meridian-power.com", "Meridian Power"),
    ("cobalt-media.com", "Cobalt Media"),
    ("alder-health.org", "Alder Health"),
];

const FIRST: [&str; 40] = [
    "phillip", "sally", "john", "vince", "jeff", "louise", "mark", "kay", "steven", "tana", "chris",
    "susan", "richard", "kim", "david", "sara", "michael", "lynn", "greg", "mary", "daniel", "carol",
    "james", "rosalee", "robert", "darrell", "kevin", "elizabeth", "andrew", "tracy", "paul", "diana",
    "brian", "stacy", "peter", "joan", "scott", "holly", "eric", "laura",
];

const LAST: [&str; 40] = [
    "allen", "beck", "arnold", "kaminski", "dasovich", "kitchen", "taylor", "mann", "kean", "jones",
    "germany", "scott", "shapiro", "ward", "delainey", "shackleton", "grigsby", "lokay", "whalley",
    "hain", "farmer", "clair", "steffes", "fleming", "badeer", "schoolcraft", "presto", "sager",
    "lewis", "geaccone", "lucci", "scholtes", "hawkins", "townsend", "keavey", "dorland", "neal",
    "salisbury", "bass", "mckay",
];

const TITLES: [&str; 8] = [
    "Vice President",
    "Senior Analyst",
    "Director, Trading",
    "Counsel",
    "Research Scientist",
    "Project Manager",
    "Associate Professor",
    "Systems Administrator",
];

/// (header, value) of each mail client.
const CLIENTS: [(&str, &str); 10] = [
    ("x-mailer", "Microsoft Outlook 8.5, Build 4.71.2173.0"),
    ("x-mailer", "Lotus Notes Release 5.0.8 June 18, 2001"),
    ("x-mailer", "Microsoft Outlook Express 6.00.2600.0000"),
    ("user-agent", "Mutt/1.2.5i"),
    ("user-agent", "Mozilla/5.0 (X11; U; Linux i686; en-US; rv:1.0.1) Gecko/20020823 Netscape/7.0"),
    ("x-mailer", "Apple Mail (2.482)"),
    ("user-agent", "Gnus/5.090007 (Oort Gnus v0.07) Emacs/21.2"),
    ("x-mailer", "QUALCOMM Windows Eudora Version 5.1"),
    ("x-mailer", "Ximian Evolution 1.0.8"),
    ("user-agent", "KMail/1.4.3"),
];

/// Clients used away from the desk.
const ROAMING: [(&str, &str); 3] = [
    ("x-mailer", "RIM BlackBerry Wireless Handheld"),
    ("x-mailer", "Web Access 2.0 (webmail)"),
    ("x-mailer", "Internet Mail Service (5.5.2653.19)"),
];

const TOPICS: [&[&str]; 10] = [
    &["gas", "pipeline", "capacity", "transport", "tariff", "nomination", "volume", "flow", "storage", "basis", "index", "delivery", "point", "firm", "interruptible"],
    &["trading", "desk", "position", "hedge", "curve", "forward", "spread", "price", "book", "risk", "var", "limit", "exposure", "deal", "counterparty"],
    &["contract", "agreement", "amendment", "legal", "clause", "signature", "draft", "review", "terms", "liability", "execution", "counsel", "exhibit", "party", "assignment"],
    &["meeting", "schedule", "agenda", "conference", "call", "room", "calendar", "tomorrow", "friday", "afternoon", "reschedule", "attendees", "minutes", "notes", "invite"],
    &["model", "regression", "volatility", "simulation", "research", "paper", "data", "estimate", "parameter", "option", "valuation", "analysis", "correlation", "sample", "results"],
    &["server", "kernel", "patch", "build", "compile", "package", "install", "bug", "release", "config", "module", "upgrade", "driver", "script", "logfile"],
    &["budget", "forecast", "expense", "invoice", "quarter", "revenue", "approval", "cost", "report", "audit", "accounting", "payment", "variance", "plan", "allocation"],
    &["students", "course", "lecture", "exam", "grading", "syllabus", "seminar", "thesis", "department", "faculty", "semester", "assignment", "office", "hours", "lab"],
    &["campaign", "press", "release", "media", "launch", "brand", "story", "editor", "coverage", "interview", "article", "headline", "audience", "draft", "deadline"],
    &["patients", "clinic", "trial", "protocol", "consent", "study", "enrollment", "nurse", "referral", "records", "compliance", "visit", "ward", "dosage", "followup"],
];

const FILLER: [&str; 48] = [
    "the", "a", "to", "and", "of", "for", "on", "in", "is", "we", "please", "let", "me", "know",
    "if", "you", "have", "any", "questions", "thanks", "this", "that", "with", "can", "will",
    "should", "would", "be", "our", "i", "think", "need", "attached", "see", "below", "regarding",
    "update", "next", "week", "today", "sure", "just", "also", "here", "there", "about", "get", "it",
];

const GREETINGS: [&str; 5] = ["Hi {name},", "{name} -", "{name},", "Hello {name},", ""];

const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];
const ZONES: [(&str, &str); 4] = [
    ("-0800", "PST"),
    ("-0600", "CST"),
    ("-0500", "EST"),
    ("+0100", "BST"),
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn hex(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from_digit(rng.random_range(0..16), 16).unwrap())
        .collect()
}

fn digits(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from_digit(rng.random_range(0..10), 10).unwrap())
        .collect()
}

fn build_domains(cfg: &DeskConfig, rng: &mut ChaCha8Rng) -> Vec<Domain> {
    let count = cfg.domains.clamp(1, DOMAIN_NAMES.len());
    (0..count)
        .map(|i| {
            let (name, org) = DOMAIN_NAMES[i];
            let style = match i % 3 {
                0 => DomainStyle::Archive,
                1 => DomainStyle::Corporate,
                _ => DomainStyle::List,
            };
            let relays = (0..rng.random_range(2..=3))
                .map(|r| format!("{}{}.{}", ["mail", "smtp", "mx", "relay"][r], rng.random_range(1..9), name))
                .collect();
            let staff = (0..6)
                .map(|s| format!("{}.{}@{}", FIRST[(i * 7 + s * 3 + 1) % 40], LAST[(i * 5 + s * 11 + 2) % 40], name))
                .collect();
            Domain {
                name: name.to_string(),
                org: org.to_string(),
                style,
                relays,
                net: (rng.random_range(10..220), rng.random_range(0..255)),
                tz: ZONES[i % ZONES.len()],
                standard_client: rng.random_range(0..CLIENTS.len()),
                staff,
                list_id: format!("{}-users.{}", name.split('.').next().unwrap_or(name), name),
            }
        })
        .collect()
}

fn build_senders(cfg: &DeskConfig, domains: &[Domain], rng: &mut ChaCha8Rng) -> Vec<Sender> {
    let mut senders = Vec::new();
    let mut used = std::collections::BTreeSet::new();
    for (d, domain) in domains.iter().enumerate() {
        let n = rng.random_range(cfg.min_senders_per_domain..=cfg.max_senders_per_domain.max(cfg.min_senders_per_domain));
        for _ in 0..n {
            let (first, last) = loop {
                let f = *FIRST.choose(rng).unwrap();
                let l = *LAST.choose(rng).unwrap();
                if used.insert((f, l)) {
                    break (f, l);
                }
            };
            let client = if domain.style != DomainStyle::List && rng.random_bool(0.55) {
                domain.standard_client
            } else {
                rng.random_range(0..CLIENTS.len())
            };
            let mut topics: Vec<usize> = (0..TOPICS.len()).collect();
            topics.shuffle(rng);
            topics.truncate(2);
            let start = rng.random_range(6..11);
            senders.push(Sender {
                domain: d,
                first: first.to_string(),
                last: last.to_string(),
                address: format!("{first}.{last}@{}", domain.name),
                title: TITLES.choose(rng).unwrap(),
                client,
                signature_rate: rng.random_range(0.3..0.9),
                greeting: rng.random_range(0..GREETINGS.len()),
                contacts: Vec::new(),
                topics,
                priority: rng
                    .random_bool(0.25)
                    .then(|| *["3 (Normal)", "1 (Highest)", "3"].choose(rng).unwrap()),
                ip: format!("{}.{}.{}.{}", domain.net.0, domain.net.1, rng.random_range(0..255), rng.random_range(2..254)),
                workday: (start, start + rng.random_range(7..11)),
                cc_rate: rng.random_range(0.0..0.4),
            });
        }
    }
    // correspondents: colleagues and staff of the own domain, plus outsiders
    let addresses: Vec<(usize, String)> = senders
        .iter()
        .map(|s| (s.domain, s.address.clone()))
        .chain(domains.iter().enumerate().flat_map(|(d, dom)| dom.staff.iter().map(move |a| (d, a.clone()))))
        .collect();
    for s in senders.iter_mut() {
        let own: Vec<&String> = addresses
            .iter()
            .filter(|(d, a)| *d == s.domain && *a != s.address)
            .map(|(_, a)| a)
            .collect();
        let other: Vec<&String> = addresses.iter().filter(|(d, _)| *d != s.domain).map(|(_, a)| a).collect();
        let n_own = rng.random_range(2..=4);
        let mut contacts: Vec<String> = own
            .choose_multiple(rng, n_own)
            .map(|a| a.to_string())
            .collect();
        let n_other = rng.random_range(1..=2);
        contacts.extend(other.choose_multiple(rng, n_other).map(|a| a.to_string()));
        s.contacts = contacts;
    }
    senders
}

fn display_name(address: &str) -> String {
    let local = address.split('@').next().unwrap_or(address);
    local.split('.').map(capitalize).collect::<Vec<_>>().join(" ")
}

const SYLLABLES: [&str; 24] = [
    "ka", "ron", "tel", "mi", "sad", "vo", "lin", "dra", "pes", "qu", "ar", "ben", "tos", "gri", "fal",
    "mun", "or", "sti", "zel", "hap", "ne", "cor", "dus", "ep",
];

/// Long-tailed word list standing in for the open vocabulary of real mail.
fn lexicon(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut words = Vec::with_capacity(size);
    while words.len() < size {
        let w: String = (0..rng.random_range(2..=3)).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn sentence(rng: &mut ChaCha8Rng, topics: &[usize], lexicon: &[String]) -> String {
    let len = rng.random_range(6..16);
    let mut words = Vec::with_capacity(len);
    for _ in 0..len {
        if rng.random_bool(0.25) {
            // power law over the lexicon: a few common words, a long tail
            let i = (lexicon.len() as f64 * rng.random::<f64>().powi(3)) as usize;
            words.push(lexicon[i.min(lexicon.len() - 1)].clone());
            continue;
        }
        let w = if rng.random_bool(0.45) {
            let topic = if rng.random_bool(0.85) {
                *topics.choose(rng).unwrap()
            } else {
                rng.random_range(0..TOPICS.len())
            };
            *TOPICS[topic].choose(rng).unwrap()
        } else {
            *FILLER.choose(rng).unwrap()
        };
        words.push(w.to_string());
    }
    let mut s = words.join(" ");
    s = capitalize(&s);
    s.push('.');
    s
}

struct Clock {
    day: u32,
}

fn date_parts(rng: &mut ChaCha8Rng, clock: &Clock, sender: &Sender) -> (String, u32, u32, u32) {
    let day = clock.day + rng.random_range(0..3);
    let hour = if rng.random_bool(0.85) {
        rng.random_range(sender.workday.0..sender.workday.1)
    } else {
        rng.random_range(0..24)
    };
    let minute = rng.random_range(0..60);
    let second = rng.random_range(0..60);
    let weekday = WEEKDAYS[(day % 7) as usize];
    let month = MONTHS[((day / 30) % 12) as usize];
    let date = format!("{weekday}, {} {month} {} ", day % 28 + 1, 2000 + day / 360);
    (date, hour, minute, second)
}

fn generate_one(
    rng: &mut ChaCha8Rng,
    index: usize,
    sender: &Sender,
    domain: &Domain,
    strangers: &[String],
    lexicon: &[String],
    clock: &Clock,
) -> RawEmail {
    let mut headers: Vec<(String, String)> = Vec::new();
    let mut h = |name: &str, value: String| headers.push((name.to_string(), value));

    let to: Vec<String> = if rng.random_bool(0.1) {
        vec![strangers.choose(rng).unwrap().clone()]
    } else {
        // first contact is the usual correspondent
        let first = if rng.random_bool(0.5) {
            sender.contacts[0].clone()
        } else {
            sender.contacts.choose(rng).unwrap().clone()
        };
        let mut to = vec![first];
        if rng.random_bool(0.2) {
            let extra = sender.contacts.choose(rng).unwrap().clone();
            if !to.contains(&extra) {
                to.push(extra);
            }
        }
        to
    };
    let cc = rng
        .random_bool(sender.cc_rate)
        .then(|| sender.contacts.choose(rng).unwrap().clone())
        .filter(|c| !to.contains(c));

    let (date, hour, minute, second) = date_parts(rng, clock, sender);
    let (offset, zone) = domain.tz;
    let stamp = format!("{date}{hour:02}:{minute:02}:{second:02} {offset} ({zone})");
    let roaming = rng.random_bool(0.12);
    let (client_header, client) = if roaming {
        *ROAMING.choose(rng).unwrap()
    } else {
        CLIENTS[sender.client]
    };
    let client_ip = if roaming {
        format!("{}.{}.{}.{}", rng.random_range(60..200), rng.random_range(0..255), rng.random_range(0..255), rng.random_range(1..255))
    } else {
        sender.ip.clone()
    };
    let relay = domain.relays.choose(rng).unwrap();
    let rcpt = &to[0];
    let rcpt_domain = rcpt.split('@').nth(1).unwrap_or("localhost");
    let subject_topic = *sender.topics.choose(rng).unwrap();
    let mut subject: Vec<&str> = (0..rng.random_range(2..5))
        .map(|_| *TOPICS[subject_topic].choose(rng).unwrap())
        .collect();
    subject.dedup();
    let mut subject = subject.iter().map(|w| capitalize(w)).collect::<Vec<_>>().join(" ");
    let subject_line = subject.clone();
    let replying = rng.random_range(0..10) < 3;
    match rng.random_range(0..10) {
        _ if replying => subject = format!("Re: {subject}"),
        0 => subject = format!("FW: {subject}"),
        _ => {}
    }
    if domain.style == DomainStyle::List {
        subject = format!("[{}] {subject}", domain.list_id.split('.').next().unwrap_or("list"));
    }

    h("return-path", format!("<{}>", sender.address));
    if domain.style == DomainStyle::List {
        h("delivered-to", rcpt.clone());
    }
    h(
        "received",
        format!(
            "from {} ({} [{}]) by mx1.{} (8.11.6/8.11.6) with ESMTP id {}{} for <{}>; {}",
            relay,
            relay,
            format_args!("{}.{}.{}.{}", domain.net.0, domain.net.1, 1, rng.random_range(2..9)),
            rcpt_domain,
            hex(rng, 6).to_uppercase(),
            digits(rng, 6),
            rcpt,
            stamp
        ),
    );
    h(
        "received",
        format!(
            "from [{}] by {} with {}; {}",
            client_ip,
            relay,
            if domain.style == DomainStyle::List { "SMTP (Postfix)" } else { "Microsoft SMTPSVC(5.0.2195.4453)" },
            stamp
        ),
    );
    let message_id = match domain.style {
        DomainStyle::Archive => format!("<{}.{}.JavaMail.evans@thyme>", digits(rng, 8), digits(rng, 13)),
        DomainStyle::Corporate => format!("<{}.{}@{}>", hex(rng, 12).to_uppercase(), digits(rng, 4), relay),
        DomainStyle::List => format!("<{}@{}>", hex(rng, 16), domain.name),
    };
    h("message-id", message_id);
    h("date", stamp.clone());
    h("from", format!("\"{} {}\" <{}>", capitalize(&sender.first), capitalize(&sender.last), sender.address));
    h("to", to.join(", "));
    if let Some(cc) = &cc {
        h("cc", cc.clone());
    }
    h("subject", subject);
    h("mime-version", "1.0".into());
    h(
        "content-type",
        match domain.style {
            DomainStyle::Archive => "text/plain; charset=us-ascii".into(),
            DomainStyle::Corporate => "text/plain; charset=\"iso-8859-1\"".into(),
            DomainStyle::List => "text/plain; charset=us-ascii; format=flowed".into(),
        },
    );
    h(
        "content-transfer-encoding",
        if domain.style == DomainStyle::Corporate { "quoted-printable" } else { "7bit" }.into(),
    );
    h(client_header, client.to_string());
    if replying {
        let parent = format!("<{}@{}>", hex(rng, 14), rcpt_domain);
        h("in-reply-to", parent.clone());
        h("references", parent);
    }
    if client.contains("Outlook") || client.contains("Internet Mail Service") {
        h("thread-topic", subject_line.clone());
        h("thread-index", format!("AcD{}", hex(rng, 20)));
        h("x-mimeole", "Produced By Microsoft MimeOLE V6.00.2600.0000".into());
        h("content-class", "urn:content-classes:message".into());
        h("x-ms-has-attach", String::new());
        h("importance", "normal".into());
    } else if client.contains("Mozilla") || client.contains("Netscape") {
        h("x-accept-language", "en-us, en".into());
    } else if client_header == "user-agent" {
        h("mail-followup-to", sender.address.clone());
    } else if client.contains("Eudora") || client.contains("Apple") {
        h("x-sender", sender.address.clone());
    }
    if let Some(p) = sender.priority {
        h("x-priority", p.to_string());
    }
    match domain.style {
        DomainStyle::Archive => {
            h("x-from", format!("{} {}", capitalize(&sender.first), capitalize(&sender.last)));
            h("x-to", to.iter().map(|a| display_name(a)).collect::<Vec<_>>().join(", "));
            h("x-cc", cc.as_deref().map(display_name).unwrap_or_default());
            h("x-bcc", String::new());
            h(
                "x-folder",
                format!("\\{}_{}_Jun2001\\Notes Folders\\Sent", capitalize(&sender.first), capitalize(&sender.last)),
            );
            h("x-origin", sender.last.to_uppercase());
            h("x-filename", format!("{}.nsf", sender.first.chars().next().unwrap_or('x')));
        }
        DomainStyle::Corporate => {
            h("organization", domain.org.clone());
            h("x-virus-scanned", format!("by amavisd-milter at {relay}"));
            h(
                "x-originalarrivaltime",
                format!("{hour:02}:{minute:02}:{second:02}.0{} (UTC) FILETIME=[{}:01C0{}]", digits(rng, 3), hex(rng, 8).to_uppercase(), hex(rng, 4).to_uppercase()),
            );
            if roaming {
                h("x-originating-ip", format!("[{client_ip}]"));
            }
        }
        DomainStyle::List => {
            h("sender", format!("{}-admin@{}", domain.list_id.split('.').next().unwrap_or("list"), domain.name));
            h("errors-to", format!("{}-admin@{}", domain.list_id.split('.').next().unwrap_or("list"), domain.name));
            h("x-beenthere", domain.list_id.clone());
            h("precedence", "bulk".into());
            h("list-id", format!("<{}>", domain.list_id));
            let list = domain.list_id.split('.').next().unwrap_or("list");
            h("x-mailman-version", "2.0.11".into());
            h("list-help", format!("<mailto:{list}-request@{}?subject=help>", domain.name));
            h("list-post", format!("<mailto:{list}@{}>", domain.name));
            h("list-archive", format!("<http://{}/pipermail/{list}/>", domain.name));
            h("x-spam-status", format!("No, hits={}.{} required=5.0 tests=KNOWN_MAILING_LIST,{}", -(rng.random_range(0..6) as i32), rng.random_range(0..10), if replying { "IN_REP_TO,QUOTED_EMAIL_TEXT" } else { "NO_REAL_NAME" }));
            h("x-spam-level", String::new());
            h("list-unsubscribe", format!("<mailto:{}-request@{}?subject=unsubscribe>", domain.list_id.split('.').next().unwrap_or("list"), domain.name));
        }
    }

    let mut body = String::new();
    let addressee = capitalize(to[0].split(['.', '@']).next().unwrap_or("all"));
    let greeting = GREETINGS[sender.greeting].replace("{name}", &addressee);
    if !greeting.is_empty() {
        body.push_str(&greeting);
        body.push_str("\n\n");
    }
    for _ in 0..rng.random_range(1..4) {
        let para: Vec<String> = (0..rng.random_range(1..4))
            .map(|_| sentence(rng, &sender.topics, lexicon))
            .collect();
        body.push_str(&para.join(" "));
        body.push_str("\n\n");
    }
    if rng.random_bool(sender.signature_rate) {
        body.push_str(&format!(
            "{}\n{}\n{}\n",
            capitalize(&sender.first),
            sender.title,
            domain.org
        ));
    } else {
        body.push_str(&format!("{}\n", capitalize(&sender.first)));
    }
    if replying {
        // the message being answered, written by the recipient
        let other = display_name(rcpt);
        let topics = [rng.random_range(0..TOPICS.len()), rng.random_range(0..TOPICS.len())];
        body.push_str(&format!(
            "\n -----Original Message-----\nFrom: {other}\nSent: {stamp}\nTo: {}\nSubject: {}\n\n",
            display_name(&sender.address),
            subject_line
        ));
        for _ in 0..rng.random_range(1..4) {
            body.push_str(&sentence(rng, &topics, lexicon));
            body.push(' ');
        }
        body.push_str(&format!("\n\n{}\n", other.split(' ').next().unwrap_or("")));
    }

    RawEmail::from_parts(headers, body, format!("desk:{index:05}")).expect("generated headers are well formed")
}

/// Generates `cfg.emails` messages. Sender volumes are skewed, as in real
/// mailboxes, but every sender writes at least eight messages.
pub fn generate(cfg: &DeskConfig) -> Vec<RawEmail> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domains = build_domains(cfg, &mut rng);
    let senders = build_senders(cfg, &domains, &mut rng);
    let strangers: Vec<String> = domains.iter().flat_map(|d| d.staff.iter().cloned()).collect();
    let lexicon = lexicon(&mut rng, 4000);

    let weights: Vec<f64> = (0..senders.len()).map(|_| rng.random_range(0.3..2.0f64)).collect();
    let floor = 8usize.min(cfg.emails / senders.len().max(1));
    let spare = cfg.emails.saturating_sub(floor * senders.len()) as f64;
    let total: f64 = weights.iter().sum();
    let mut quota: Vec<usize> = weights.iter().map(|w| floor + (spare * w / total).floor() as usize).collect();
    let mut i = 0;
    while quota.iter().sum::<usize>() < cfg.emails {
        quota[i % senders.len()] += 1;
        i += 1;
    }

    let mut plan: Vec<usize> = quota.iter().enumerate().flat_map(|(s, &q)| std::iter::repeat_n(s, q)).collect();
    plan.shuffle(&mut rng);
    let mut clock = Clock { day: 0 };
    plan.into_iter()
        .enumerate()
        .map(|(index, s)| {
            if index % 4 == 0 {
                clock.day += 1;
            }
            let sender = &senders[s];
            generate_one(&mut rng, index, sender, &domains[sender.domain], &strangers, &lexicon, &clock)
        })
        .collect()
}

pub fn generate_corpus(cfg: &DeskConfig) -> Corpus {
    Corpus::benign(generate(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let cfg = DeskConfig::default();
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a, b);
        assert_eq!(a.len(), 600);
        let corpus = Corpus::benign(a);
        assert!(corpus.senders().len() >= 20, "{}", corpus.senders().len());
    }

    #[test]
    fn every_sender_has_enough_mail() {
        let corpus = generate_corpus(&DeskConfig::default());
        for s in corpus.senders() {
            let n = corpus.emails().iter().filter(|e| e.claimed_sender() == s).count();
            assert!(n >= 8, "{s}: {n}");
        }
    }

    #[test]
    fn messages_survive_serialization() {
        for email in generate(&DeskConfig { emails: 40, ..DeskConfig::default() }) {
            let text = email.to_message_string();
            let back = crate::corpus::parse_email(text.as_bytes(), email.source_id()).unwrap();
            assert_eq!(back.headers(), email.headers());
            assert_eq!(back.claimed_sender(), email.claimed_sender());
        }
    }
}
