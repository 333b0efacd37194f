//! Value pools for synthetic records.

pub const GIVEN_NAMES: &[&str] = &[
    "james", "olivia", "william", "charlotte", "jack", "amelia", "noah", "isla", "thomas", "mia",
    "oliver", "grace", "lucas", "chloe", "henry", "emily", "ethan", "sophie", "samuel", "ruby",
    "daniel", "zoe", "matthew", "lily", "joshua", "hannah", "benjamin", "jessica", "alexander", "ella",
    "riley", "georgia", "harrison", "scarlett", "cooper", "matilda", "lachlan", "evie", "liam", "ivy",
    "stephen", "kathleen", "patrick", "rebecca", "nicholas", "phoebe", "michael", "sienna", "christopher", "madison",
];

pub const SURNAMES: &[&str] = &[
    "smith", "jones", "williams", "brown", "wilson", "taylor", "johnson", "white", "martin", "anderson",
    "thompson", "nguyen", "thomas", "walker", "harris", "lee", "ryan", "robinson", "kelly", "king",
    "davis", "wright", "evans", "roberts", "green", "hall", "wood", "jackson", "clarke", "patel",
    "campbell", "mitchell", "hughes", "young", "stewart", "murphy", "cook", "morris", "phillips", "bennett",
    "mcdonald", "fitzgerald", "oconnor", "kowalski", "papadopoulos", "schneider", "fraser", "ferguson", "macpherson", "whitfield",
];

pub const STREETS: &[&str] = &[
    "george", "victoria", "church", "high", "station", "park", "railway", "william", "king", "queen",
    "elizabeth", "albert", "bridge", "mill", "hill", "river", "beach", "anzac", "wattle", "banksia",
    "jacaranda", "kookaburra", "waratah", "eucalyptus", "boronia", "lachlan", "macquarie", "hawkesbury", "flinders", "sturt",
];

pub const STREET_TYPES: &[&str] = &["street", "road", "avenue", "place", "crescent", "drive", "lane", "parade", "close", "terrace"];

pub const SUBURBS: &[&str] = &[
    "parramatta", "blacktown", "penrith", "liverpool", "hornsby", "chatswood", "bondi", "manly", "newtown", "marrickville",
    "fitzroy", "richmond", "carlton", "brunswick", "footscray", "geelong", "ballarat", "bendigo", "toowoomba", "rockhampton",
    "fremantle", "joondalup", "glenelg", "norwood", "launceston", "hobart", "belconnen", "tuggeranong", "wollongong", "dubbo",
];

/// State codes with their postcode ranges.
pub const STATES: &[(&str, u32, u32)] = &[
    ("nsw", 2000, 2999),
    ("vic", 3000, 3999),
    ("qld", 4000, 4999),
    ("sa", 5000, 5799),
    ("wa", 6000, 6797),
    ("tas", 7000, 7799),
    ("act", 2600, 2618),
    ("nt", 800, 899),
];
