//! Fixtures shared by the integration test targets.
#![allow(dead_code)]

pub mod http;

use feedsim::corpus::test_fixtures;
use feedsim::corpus::{Column, ColumnType, DatabaseSchema, SchemaStore, Table};
use feedsim::edit_engine::diff;
use feedsim::embedding::{DeterministicProvider, EmbeddingError, EmbeddingMatrix, EmbeddingProvider};
use feedsim::sql::*;
use feedsim::verbalizer::{template_feedback, TemplateFeedback};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table(name: &str, cols: &[&str]) -> Table {
    Table {
        name: name.into(),
        columns: cols
            .iter()
            .map(|c| Column {
                name: (*c).into(),
                ty: ColumnType::Text,
            })
            .collect(),
    }
}

fn single(db: &str, t: Table) -> DatabaseSchema {
    DatabaseSchema {
        db_id: db.into(),
        tables: vec![t],
        primary_keys: vec![],
        foreign_keys: vec![],
    }
}

pub fn store() -> SchemaStore {
    SchemaStore::new([
        test_fixtures::dogs_schema(),
        test_fixtures::cars_schema(),
        test_fixtures::docs_schema(),
        single("e_learning", table("addresses", &["address_id", "town_city", "state_province_county"])),
        single("film_rank", table("film", &["film_id", "title", "studio", "director"])),
        single(
            "farm",
            table("farm_competition", &["competition_id", "year", "theme", "host_city_id", "hosts"]),
        ),
        single("college", table("student", &["stuid", "lname", "fname", "age", "sex", "city_code"])),
    ])
    .expect("schemas are valid")
}

pub const DOGS: &str = "dog_kennels";
pub const CARS: &str = "car_1";
pub const DOCS: &str = "cre_Doc_Tracking_DB";

/// Hand-built queries touching every construct the grammar supports.
pub const QUERIES: &[(&str, &str)] = &[
    (DOGS, "SELECT count(*) FROM dogs"),
    (DOGS, "SELECT name FROM dogs"),
    (DOGS, "SELECT name , age FROM dogs"),
    (DOGS, "SELECT age , name FROM dogs"),
    (DOGS, "SELECT DISTINCT breed_code FROM dogs"),
    (DOGS, "SELECT count(DISTINCT breed_code) FROM dogs"),
    (DOGS, "SELECT max(age) , min(weight) FROM dogs"),
    (DOGS, "SELECT avg(cost_of_treatment) , sum(cost_of_treatment) FROM treatments"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3"),
    (DOGS, "SELECT name FROM dogs WHERE age >= 3"),
    (DOGS, "SELECT name FROM dogs WHERE age < 3"),
    (DOGS, "SELECT name FROM dogs WHERE age <= 3"),
    (DOGS, "SELECT name FROM dogs WHERE age = '3'"),
    (DOGS, "SELECT name FROM dogs WHERE age = 3"),
    (DOGS, "SELECT name FROM dogs WHERE age != 3"),
    (DOGS, "SELECT name FROM dogs WHERE age BETWEEN 2 AND 5"),
    (DOGS, "SELECT name FROM dogs WHERE age >= 2 AND age <= 5"),
    (DOGS, "SELECT name FROM dogs WHERE name LIKE '%a%'"),
    (DOGS, "SELECT name FROM dogs WHERE name NOT LIKE '%a%'"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3 AND weight < 9"),
    (DOGS, "SELECT name FROM dogs WHERE weight < 9 AND age > 3"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3 OR weight < 9"),
    (DOGS, "SELECT name FROM dogs WHERE (age > 3 OR weight < 9) AND breed_code = 'BUL'"),
    (DOGS, "SELECT name FROM dogs WHERE breed_code IN ('BUL', 'ESK')"),
    (DOGS, "SELECT name FROM dogs WHERE breed_code IN ('ESK', 'BUL')"),
    (DOGS, "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments)"),
    (
        DOGS,
        "SELECT name FROM dogs WHERE dog_id NOT IN (SELECT dog_id FROM treatments WHERE cost_of_treatment > 100)",
    ),
    (DOGS, "SELECT name FROM dogs WHERE age > (SELECT avg(age) FROM dogs)"),
    (
        DOGS,
        "SELECT T1.name FROM dogs AS T1 JOIN owners AS T2 ON T1.owner_id = T2.owner_id WHERE T2.state = 'Virginia'",
    ),
    (
        DOGS,
        "SELECT dogs.name FROM owners JOIN dogs ON owners.owner_id = dogs.owner_id WHERE owners.state = \"virginia\"",
    ),
    (
        DOGS,
        "SELECT T1.first_name , T3.name FROM owners AS T1 JOIN dogs AS T3 ON T1.owner_id = T3.owner_id JOIN treatments AS T2 ON T2.dog_id = T3.dog_id",
    ),
    (DOGS, "SELECT breed_code , count(*) FROM dogs GROUP BY breed_code"),
    (DOGS, "SELECT breed_code FROM dogs GROUP BY breed_code HAVING count(*) > 2"),
    (DOGS, "SELECT owner_id FROM dogs GROUP BY owner_id HAVING avg(age) >= 3 AND count(*) > 1"),
    (DOGS, "SELECT name FROM dogs ORDER BY age DESC"),
    (DOGS, "SELECT name FROM dogs ORDER BY age ASC LIMIT 3"),
    (DOGS, "SELECT name FROM dogs ORDER BY age DESC LIMIT 1"),
    (DOGS, "SELECT name , age FROM dogs ORDER BY age , weight DESC"),
    (DOGS, "SELECT name FROM dogs UNION SELECT first_name FROM owners"),
    (DOGS, "SELECT first_name FROM owners INTERSECT SELECT first_name FROM professionals"),
    (DOGS, "SELECT city FROM professionals EXCEPT SELECT city FROM owners"),
    (DOGS, "SELECT name , weight - age FROM dogs WHERE weight > age"),
    (CARS, "SELECT count(*) FROM cars_data WHERE cylinders > 4"),
    (
        CARS,
        "SELECT T1.maker FROM car_makers AS T1 JOIN model_list AS T2 ON T1.id = T2.maker GROUP BY T1.maker HAVING count(*) >= 2",
    ),
    (CARS, "SELECT model FROM car_names WHERE makeid IN (SELECT id FROM cars_data WHERE year < 1980)"),
    (
        CARS,
        "SELECT avg(horsepower) FROM cars_data WHERE year BETWEEN 1970 AND 1975 OR cylinders = 8",
    ),
    (CARS, "SELECT continent , count(*) FROM countries GROUP BY continent ORDER BY count(*) DESC LIMIT 1"),
    (DOCS, "SELECT document_type_name FROM ref_document_types WHERE document_type_code = 'CV'"),
    (
        DOCS,
        "SELECT location_name FROM ref_locations EXCEPT SELECT location_name FROM ref_locations WHERE location_code = 'b'",
    ),
    (
        DOCS,
        "SELECT count(DISTINCT document_type_code) FROM all_documents WHERE date_stored > '1990-01-01'",
    ),
];

/// Index pairs of `QUERIES` that must set-match.
pub const EQUIVALENT: &[(usize, usize)] = &[(2, 3), (12, 13), (19, 20), (23, 24), (28, 29)];

pub fn parse(db: &str, sql: &str) -> Query {
    let store = store();
    let schema = store.get(db).unwrap_or_else(|| panic!("unknown db {db}"));
    parse_sql(sql, schema).unwrap_or_else(|e| panic!("{sql}: {e}"))
}

/// Wrong/gold pairs covering every edit category.
pub const EDIT_PAIRS: &[(&str, &str, &str)] = &[
    // select
    (DOGS, "SELECT name FROM dogs", "SELECT max(age) FROM dogs"),
    (DOGS, "SELECT name FROM dogs", "SELECT name , age FROM dogs"),
    (DOGS, "SELECT name , age FROM dogs", "SELECT name FROM dogs"),
    (DOGS, "SELECT count(*) FROM breeds", "SELECT count(DISTINCT dog_id) FROM treatments"),
    (DOGS, "SELECT DISTINCT name FROM dogs", "SELECT name FROM dogs"),
    (DOGS, "SELECT name FROM dogs", "SELECT DISTINCT name FROM dogs"),
    (DOGS, "SELECT avg(age) FROM dogs", "SELECT sum(age) FROM dogs"),
    // from
    (DOGS, "SELECT first_name FROM owners", "SELECT first_name FROM professionals"),
    (
        DOGS,
        "SELECT name FROM dogs",
        "SELECT T1.name FROM dogs AS T1 JOIN owners AS T2 ON T1.owner_id = T2.owner_id",
    ),
    (
        DOGS,
        "SELECT T1.name FROM dogs AS T1 JOIN owners AS T2 ON T1.owner_id = T2.owner_id",
        "SELECT name FROM dogs",
    ),
    (
        DOGS,
        "SELECT T1.name FROM dogs AS T1 JOIN owners AS T2 ON T1.owner_id = T2.owner_id WHERE T2.state = 'VA'",
        "SELECT T1.name FROM dogs AS T1 JOIN treatments AS T2 ON T1.dog_id = T2.dog_id WHERE T2.cost_of_treatment > 10",
    ),
    // where
    (DOGS, "SELECT name FROM dogs WHERE age > 3", "SELECT name FROM dogs WHERE weight > 3"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3", "SELECT name FROM dogs WHERE age < 3"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3", "SELECT name FROM dogs WHERE age > 5"),
    (DOGS, "SELECT name FROM dogs", "SELECT name FROM dogs WHERE age BETWEEN 1 AND 3"),
    (DOGS, "SELECT name FROM dogs WHERE age > 3", "SELECT name FROM dogs"),
    (
        DOGS,
        "SELECT name FROM dogs WHERE age > 3 OR weight < 9",
        "SELECT name FROM dogs WHERE age > 3 AND weight < 9",
    ),
    (
        DOGS,
        "SELECT name FROM dogs WHERE age > 3 AND weight < 9",
        "SELECT name FROM dogs WHERE age > 3",
    ),
    (
        DOGS,
        "SELECT name FROM dogs WHERE age > 3",
        "SELECT name FROM dogs WHERE age > 3 AND name LIKE '%a%'",
    ),
    (
        DOGS,
        "SELECT name FROM dogs WHERE breed_code IN ('BUL')",
        "SELECT name FROM dogs WHERE breed_code NOT IN ('BUL')",
    ),
    // order / limit
    (DOGS, "SELECT name FROM dogs", "SELECT name FROM dogs ORDER BY age DESC"),
    (DOGS, "SELECT name FROM dogs ORDER BY age ASC", "SELECT name FROM dogs ORDER BY age DESC"),
    (DOGS, "SELECT name FROM dogs ORDER BY age ASC", "SELECT name FROM dogs ORDER BY weight DESC"),
    (DOGS, "SELECT name FROM dogs ORDER BY age DESC", "SELECT name FROM dogs"),
    (DOGS, "SELECT name FROM dogs ORDER BY age DESC", "SELECT name FROM dogs ORDER BY age DESC LIMIT 1"),
    (DOGS, "SELECT name FROM dogs ORDER BY age DESC LIMIT 3", "SELECT name FROM dogs ORDER BY age DESC LIMIT 1"),
    (CARS, "SELECT max(mpg) FROM cars_data", "SELECT mpg FROM cars_data ORDER BY mpg DESC LIMIT 1"),
    // group by / having
    (DOGS, "SELECT breed_code , count(*) FROM dogs", "SELECT breed_code , count(*) FROM dogs GROUP BY breed_code"),
    (
        DOGS,
        "SELECT breed_code , count(*) FROM dogs GROUP BY breed_code",
        "SELECT breed_code , count(*) FROM dogs GROUP BY size_code",
    ),
    (
        DOGS,
        "SELECT breed_code FROM dogs GROUP BY breed_code HAVING count(*) > 2",
        "SELECT breed_code FROM dogs GROUP BY breed_code HAVING avg(age) > 2",
    ),
    (
        DOGS,
        "SELECT breed_code FROM dogs GROUP BY breed_code",
        "SELECT breed_code FROM dogs GROUP BY breed_code HAVING count(*) >= 2",
    ),
    (
        DOGS,
        "SELECT breed_code FROM dogs GROUP BY breed_code HAVING count(*) > 2",
        "SELECT breed_code FROM dogs GROUP BY breed_code",
    ),
    // nested and set operations
    (
        DOGS,
        "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments WHERE cost_of_treatment > 10)",
        "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments WHERE cost_of_treatment > 20)",
    ),
    (
        DOGS,
        "SELECT name FROM dogs WHERE age > (SELECT avg(age) FROM dogs)",
        "SELECT name FROM dogs WHERE age < (SELECT avg(age) FROM dogs)",
    ),
    (
        DOGS,
        "SELECT name FROM dogs UNION SELECT first_name FROM owners",
        "SELECT name FROM dogs INTERSECT SELECT first_name FROM owners",
    ),
    (
        DOGS,
        "SELECT city FROM professionals EXCEPT SELECT city FROM owners",
        "SELECT city FROM professionals EXCEPT SELECT state FROM owners",
    ),
    (DOGS, "SELECT name FROM dogs", "SELECT name FROM dogs EXCEPT SELECT name FROM dogs WHERE age > 3"),
    // several clauses at once
    (
        DOGS,
        "SELECT name , age FROM dogs WHERE age > 3 ORDER BY age ASC",
        "SELECT DISTINCT name FROM dogs WHERE weight > 3 ORDER BY weight DESC LIMIT 1",
    ),
    (
        CARS,
        "SELECT max(T3.horsepower) FROM model_list AS T1 JOIN car_names AS T2 ON T1.model = T2.model JOIN cars_data AS T3 ON T2.makeid = T3.id WHERE T1.model = \"amc\" OR T3.year < 1",
        "SELECT mpg FROM cars_data WHERE cylinders = 8 OR year < 1980 ORDER BY mpg DESC LIMIT 1",
    ),
    (
        DOCS,
        "SELECT document_type_description FROM ref_document_types",
        "SELECT location_name FROM ref_locations",
    ),
];

/// (db, wrong, gold, structural)
pub const STRUCTURAL_CASES: &[(&str, &str, &str, bool)] = &[
    (
        "e_learning",
        "SELECT town_city , state_province_county FROM addresses",
        "SELECT town_city FROM addresses UNION SELECT state_province_county FROM addresses",
        true,
    ),
    (
        "film_rank",
        "SELECT studio FROM film WHERE director != \"Walter Hill\"",
        "SELECT studio FROM film EXCEPT SELECT studio FROM film WHERE director = \"Walter Hill\"",
        true,
    ),
    (
        "farm",
        "SELECT theme FROM farm_competition WHERE competition_id NOT IN ( SELECT theme FROM farm_competition )",
        "SELECT hosts FROM farm_competition WHERE theme != \"Aliens\"",
        true,
    ),
    (
        "college",
        "SELECT fname FROM student WHERE city_code = \"PHL\" INTERSECT SELECT fname FROM student WHERE age < 20",
        "SELECT fname FROM student WHERE city_code = \"PHL\" AND age BETWEEN 20 AND 25",
        true,
    ),
    (
        DOGS,
        "SELECT name FROM dogs",
        "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments)",
        true,
    ),
    (
        DOGS,
        "SELECT first_name FROM owners",
        "SELECT first_name FROM owners INTERSECT SELECT first_name FROM professionals",
        true,
    ),
    (DOGS, "SELECT count ( * ) FROM breeds", "SELECT count(DISTINCT dog_id) FROM treatments", false),
    (
        CARS,
        "SELECT Max ( T3.horsepower ) FROM model_list AS T1 JOIN car_names AS T2 ON T1.model = T2.model JOIN cars_data AS T3 ON T2.makeid = T3.id WHERE T1.model = \"amc\" OR T3.year < 1",
        "SELECT mpg FROM cars_data WHERE cylinders = 8 OR year < 1980 ORDER BY mpg DESC LIMIT 1",
        false,
    ),
    (
        DOGS,
        "SELECT name FROM dogs UNION SELECT first_name FROM owners",
        "SELECT name FROM dogs EXCEPT SELECT first_name FROM owners",
        false,
    ),
    (
        DOGS,
        "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments WHERE cost_of_treatment > 10)",
        "SELECT name FROM dogs WHERE dog_id IN (SELECT dog_id FROM treatments WHERE cost_of_treatment > 20)",
        false,
    ),
    (
        "college",
        "SELECT fname FROM student WHERE age < 20",
        "SELECT fname FROM student WHERE age BETWEEN 20 AND 25",
        false,
    ),
    (
        "film_rank",
        "SELECT title FROM film ORDER BY title",
        "SELECT DISTINCT studio FROM film ORDER BY title DESC",
        false,
    ),
];

// Independent exact-set-match oracle: order-insensitive parts are compared as
// multisets by backtracking search instead of by sorting.

fn multiset_eq<T>(a: &[T], b: &[T], eq: &dyn Fn(&T, &T) -> bool) -> bool {
    fn go<T>(a: &[T], b: &[T], used: &mut Vec<bool>, eq: &dyn Fn(&T, &T) -> bool) -> bool {
        let Some((first, rest)) = a.split_first() else {
            return true;
        };
        for j in 0..b.len() {
            if !used[j] && eq(first, &b[j]) {
                used[j] = true;
                if go(rest, b, used, eq) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    a.len() == b.len() && go(a, b, &mut vec![false; b.len()], eq)
}

fn lit_eq(a: &Literal, b: &Literal) -> bool {
    match (a.text.trim().parse::<f64>(), b.text.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        (Err(_), Err(_)) => a.text.to_lowercase() == b.text.to_lowercase(),
        _ => false,
    }
}

fn value_eq(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Literal(x), Value::Literal(y)) => lit_eq(x, y),
        (Value::List(x), Value::List(y)) => multiset_eq(x, y, &lit_eq),
        (Value::Column(x), Value::Column(y)) => x == y,
        (Value::Subquery(x), Value::Subquery(y)) => oracle_match(x, y),
        _ => false,
    }
}

fn atom_eq(a: &Atom, b: &Atom) -> bool {
    a.operand == b.operand
        && a.op == b.op
        && value_eq(&a.value, &b.value)
        && match (&a.second_value, &b.second_value) {
            (None, None) => true,
            (Some(x), Some(y)) => lit_eq(x, y),
            _ => false,
        }
}

fn flatten(c: &Condition, conn: Connector, out: &mut Vec<Condition>) {
    match c {
        Condition::And(ch) | Condition::Or(ch) if c.connector() == Some(conn) => ch.iter().for_each(|x| flatten(x, conn, out)),
        other => out.push(other.clone()),
    }
}

fn cond_eq(a: &Condition, b: &Condition) -> bool {
    match (a, b) {
        (Condition::Atom(x), Condition::Atom(y)) => atom_eq(x, y),
        _ if a.connector().is_some() && a.connector() == b.connector() => {
            let conn = a.connector().unwrap();
            let (mut fa, mut fb) = (Vec::new(), Vec::new());
            flatten(a, conn, &mut fa);
            flatten(b, conn, &mut fb);
            multiset_eq(&fa, &fb, &cond_eq)
        }
        _ => false,
    }
}

fn opt_eq<T>(a: &Option<T>, b: &Option<T>, eq: impl Fn(&T, &T) -> bool) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => eq(x, y),
        _ => false,
    }
}

pub fn oracle_match(a: &Query, b: &Query) -> bool {
    let join_eq = |x: &Join, y: &Join| (x.left == y.left && x.right == y.right) || (x.left == y.right && x.right == y.left);
    a.select.distinct == b.select.distinct
        && multiset_eq(&a.select.items, &b.select.items, &|x, y| x == y)
        && multiset_eq(&a.from.tables, &b.from.tables, &|x, y| x == y)
        && multiset_eq(&a.from.joins, &b.from.joins, &join_eq)
        && opt_eq(&a.where_clause, &b.where_clause, cond_eq)
        && multiset_eq(&a.group_by, &b.group_by, &|x, y| x == y)
        && opt_eq(&a.having, &b.having, cond_eq)
        && a.order_by == b.order_by
        && a.limit == b.limit
        && opt_eq(&a.set_op, &b.set_op, |x, y| x.kind == y.kind && oracle_match(&x.query, &y.query))
}

// Synthetic feedback corpora for ranking tests.

pub struct Synthetic {
    pub db: String,
    pub reference: TemplateFeedback,
    pub positive: String,
}

const FILLER: &[(&str, &str)] = &[
    ("in place of", "instead of"),
    ("additionally find", "also show"),
    ("find", "show"),
    ("consider the", "use the"),
    ("order the results", "sort the results"),
];

/// Rewording of a template that keeps every schema mention.
pub fn paraphrase(template: &str) -> String {
    let mut out = template.to_string();
    for (from, to) in FILLER {
        out = out.replace(from, to);
    }
    out.trim_end_matches(" .").to_string()
}

fn random_pair(schema: &DatabaseSchema, rng: &mut ChaCha8Rng) -> Option<(String, String)> {
    let t = schema.tables.choose(rng)?;
    if t.columns.len() < 3 {
        return None;
    }
    let cols: Vec<&str> = t.columns.choose_multiple(rng, 3).map(|c| c.name.as_str()).collect();
    let (a, b, c) = (cols[0], cols[1], cols[2]);
    let n = rng.random_range(1..50);
    let name = &t.name;
    Some(match rng.random_range(0..5) {
        0 => (format!("SELECT {a} FROM {name}"), format!("SELECT {b} FROM {name}")),
        1 => (
            format!("SELECT {a} FROM {name} WHERE {b} > {n}"),
            format!("SELECT {a} FROM {name} WHERE {c} > {n}"),
        ),
        2 => (format!("SELECT {a} FROM {name}"), format!("SELECT {a} , {b} FROM {name}")),
        3 => (
            format!("SELECT {a} FROM {name} ORDER BY {b} ASC"),
            format!("SELECT {a} FROM {name} ORDER BY {c} DESC"),
        ),
        _ => {
            let other = schema.tables.iter().filter(|o| o.name != *name && o.columns.iter().any(|x| x.name == a)).collect::<Vec<_>>();
            let o = other.choose(rng)?;
            (format!("SELECT {a} FROM {name}"), format!("SELECT {a} FROM {}", o.name))
        }
    })
}

/// `n` distinct template/paraphrase pairs over the dogs, cars and documents
/// schemas.
pub fn synthetic(n: usize, seed: u64) -> Vec<Synthetic> {
    let store = store();
    let dbs = [DOGS, CARS, DOCS];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < n {
        let db = *dbs.choose(&mut rng).unwrap();
        let schema = store.get(db).unwrap();
        let Some((wrong, gold)) = random_pair(schema, &mut rng) else {
            continue;
        };
        let script = diff(&parse_sql(&wrong, schema).unwrap(), &parse_sql(&gold, schema).unwrap());
        let Ok(reference) = template_feedback(&script, schema) else {
            continue;
        };
        let text = reference.text();
        if !seen.insert(text.clone()) {
            continue;
        }
        out.push(Synthetic {
            db: db.into(),
            positive: paraphrase(&text),
            reference,
        });
    }
    out
}

/// Trigram embeddings buried under a large per-sentence offset. Every token
/// of a sentence shares the offset, so raw cosine mostly measures which
/// sentences happen to have aligned offsets; a projection that discards the
/// offset coordinates recovers the trigram signal.
pub struct NoisyProvider {
    signal: DeterministicProvider,
    signal_dim: usize,
    noise_dim: usize,
    scale: f64,
}

impl NoisyProvider {
    pub fn new(signal_dim: usize, noise_dim: usize, scale: f64) -> Self {
        NoisyProvider {
            signal: DeterministicProvider::new(signal_dim),
            signal_dim,
            noise_dim,
            scale,
        }
    }
}

fn fnv(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

impl EmbeddingProvider for NoisyProvider {
    fn id(&self) -> String {
        format!("noisy-{}-{}", self.signal_dim, self.noise_dim)
    }

    fn kind(&self) -> &'static str {
        "test"
    }

    fn dim(&self) -> Option<usize> {
        Some(self.signal_dim + self.noise_dim)
    }

    fn embed_tokens(&self, tokens: &[String]) -> Result<EmbeddingMatrix, EmbeddingError> {
        let sig = self.signal.embed_tokens(tokens)?;
        let mut rng = ChaCha8Rng::seed_from_u64(fnv(&tokens.join(" ")));
        let offset: Vec<f64> = (0..self.noise_dim).map(|_| rng.random_range(-1.0..1.0) * self.scale).collect();
        let d = self.signal_dim + self.noise_dim;
        let mut v = Array2::zeros((tokens.len(), d));
        for i in 0..tokens.len() {
            for k in 0..self.signal_dim {
                v[[i, k]] = sig.vectors[[i, k]];
            }
            for k in 0..self.noise_dim {
                v[[i, self.signal_dim + k]] = offset[k];
            }
        }
        Ok(EmbeddingMatrix::new(tokens.to_vec(), v))
    }
}

