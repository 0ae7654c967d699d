//! Synthetic app definitions: the single-indicator example apps and the
//! 21-app two-cohort corpus with its intended risk levels.

use crate::apk::ApkBuilder;
use crate::axml::{AttrValue, AxmlWriter, XmlElement};
use crate::dex::build_dex;

pub const ACTION_MAIN: &str = "android.intent.action.MAIN";
pub const ACTION_VIEW: &str = "android.intent.action.VIEW";
pub const CATEGORY_LAUNCHER: &str = "android.intent.category.LAUNCHER";
pub const CATEGORY_DEFAULT: &str = "android.intent.category.DEFAULT";
pub const CATEGORY_BROWSABLE: &str = "android.intent.category.BROWSABLE";
pub const ACTION_INSTALL_REFERRER: &str = "com.android.vending.INSTALL_REFERRER";

pub const NSC_REF: u32 = 0x7f13_0002;
const LABEL_REF: u32 = 0x7f12_0000;
const ICON_REF: u32 = 0x7f0e_0000;
const BACKUP_RULES_REF: u32 = 0x7f13_0000;
const EXTRACTION_RULES_REF: u32 = 0x7f13_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cohort {
    Children,
    General,
}

impl Cohort {
    pub fn label(self) -> &'static str {
        match self {
            Cohort::Children => "children-oriented",
            Cohort::General => "general-audience",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub actions: Vec<String>,
    pub categories: Vec<String>,
    pub data: Vec<(String, Option<String>)>,
}

impl Filter {
    pub fn new(actions: &[&str], categories: &[&str]) -> Self {
        Filter {
            actions: actions.iter().map(|s| s.to_string()).collect(),
            categories: categories.iter().map(|s| s.to_string()).collect(),
            data: Vec::new(),
        }
    }

    pub fn data(mut self, scheme: &str, host: Option<&str>) -> Self {
        self.data
            .push((scheme.to_string(), host.map(str::to_string)));
        self
    }

    fn element(&self) -> XmlElement {
        let mut e = XmlElement::new("intent-filter");
        for a in &self.actions {
            e = e.child(XmlElement::new("action").android("name", AttrValue::Str(a.clone())));
        }
        for c in &self.categories {
            e = e.child(XmlElement::new("category").android("name", AttrValue::Str(c.clone())));
        }
        for (scheme, host) in &self.data {
            let mut d = XmlElement::new("data").android("scheme", AttrValue::Str(scheme.clone()));
            if let Some(h) = host {
                d = d.android("host", AttrValue::Str(h.clone()));
            }
            e = e.child(d);
        }
        e
    }
}

#[derive(Debug, Clone)]
pub struct Component {
    pub kind: &'static str,
    pub name: String,
    pub exported: Option<bool>,
    pub permission: Option<String>,
    pub filters: Vec<Filter>,
}

impl Component {
    pub fn new(kind: &'static str, name: &str) -> Self {
        Component {
            kind,
            name: name.to_string(),
            exported: None,
            permission: None,
            filters: Vec::new(),
        }
    }

    pub fn launcher(name: &str) -> Self {
        Component::new("activity", name)
            .exported(true)
            .filter(Filter::new(&[ACTION_MAIN], &[CATEGORY_LAUNCHER]))
    }

    pub fn deep_link(name: &str, scheme: &str, host: &str) -> Self {
        Component::new("activity", name).filter(
            Filter::new(&[ACTION_VIEW], &[CATEGORY_DEFAULT, CATEGORY_BROWSABLE])
                .data(scheme, Some(host)),
        )
    }

    pub fn exported(mut self, v: bool) -> Self {
        self.exported = Some(v);
        self
    }

    pub fn permission(mut self, p: &str) -> Self {
        self.permission = Some(p.to_string());
        self
    }

    pub fn filter(mut self, f: Filter) -> Self {
        self.filters.push(f);
        self
    }

    fn element(&self) -> XmlElement {
        let mut e = XmlElement::new(self.kind).android("name", AttrValue::Str(self.name.clone()));
        if let Some(x) = self.exported {
            e = e.android("exported", AttrValue::Bool(x));
        }
        if let Some(p) = &self.permission {
            e = e.android("permission", AttrValue::Str(p.clone()));
        }
        e.children(self.filters.iter().map(Filter::element))
    }
}

#[derive(Debug, Clone, Default)]
pub struct NscFile {
    pub base_cleartext: Option<bool>,
    pub domain_cleartext: Vec<(String, bool)>,
}

impl NscFile {
    pub fn element(&self) -> XmlElement {
        let mut root = XmlElement::new("network-security-config");
        if let Some(b) = self.base_cleartext {
            root = root.child(
                XmlElement::new("base-config")
                    .plain("cleartextTrafficPermitted", AttrValue::Bool(b)),
            );
        }
        for (domain, permitted) in &self.domain_cleartext {
            root = root.child(
                XmlElement::new("domain-config")
                    .plain("cleartextTrafficPermitted", AttrValue::Bool(*permitted))
                    .child(
                        XmlElement::new("domain")
                            .plain("includeSubdomains", AttrValue::Bool(true))
                            .plain("name", AttrValue::Str(domain.clone())),
                    ),
            );
        }
        root
    }

    pub fn encode(&self) -> Vec<u8> {
        AxmlWriter::default()
            .without_namespaces()
            .encode(&self.element())
    }
}

#[derive(Debug, Clone)]
pub struct AppSpec {
    /// File stem of the generated APK.
    pub slug: String,
    pub package: String,
    pub cohort: Cohort,
    /// Level the rubric must assign: "high", "medium" or "low".
    pub expected_level: &'static str,
    pub min_sdk: i32,
    pub target_sdk: Option<i32>,
    pub permissions: Vec<String>,
    pub allow_backup: Option<bool>,
    pub backup_agent: Option<String>,
    pub restore_any_version: Option<bool>,
    pub full_backup_content: bool,
    pub data_extraction_rules: bool,
    pub uses_cleartext: Option<bool>,
    pub nsc_on_manifest: bool,
    pub nsc_on_application: bool,
    pub nsc_file: Option<NscFile>,
    pub metadata: Vec<(String, String)>,
    pub components: Vec<Component>,
    /// One string list per `classes*.dex`.
    pub dex: Vec<Vec<String>>,
}

impl AppSpec {
    pub fn new(slug: &str, package: &str, cohort: Cohort, expected_level: &'static str) -> Self {
        let path = package.replace('.', "/");
        AppSpec {
            slug: slug.to_string(),
            package: package.to_string(),
            cohort,
            expected_level,
            min_sdk: 21,
            target_sdk: Some(33),
            permissions: vec![
                "android.permission.INTERNET".to_string(),
                "android.permission.ACCESS_NETWORK_STATE".to_string(),
            ],
            allow_backup: None,
            backup_agent: None,
            restore_any_version: None,
            full_backup_content: false,
            data_extraction_rules: false,
            uses_cleartext: None,
            nsc_on_manifest: false,
            nsc_on_application: false,
            nsc_file: None,
            metadata: Vec::new(),
            components: vec![Component::launcher(".MainActivity")],
            dex: vec![vec![
                "<init>".to_string(),
                "Landroid/app/Activity;".to_string(),
                format!("L{path}/MainActivity;"),
                "Ljava/lang/Object;".to_string(),
                "V".to_string(),
                "onCreate".to_string(),
            ]],
        }
    }

    pub fn permission(&mut self, p: &str) -> &mut Self {
        self.permissions.push(p.to_string());
        self
    }

    pub fn meta(&mut self, name: &str, value: &str) -> &mut Self {
        self.metadata.push((name.to_string(), value.to_string()));
        self
    }

    pub fn component(&mut self, c: Component) -> &mut Self {
        self.components.push(c);
        self
    }

    /// Adds class descriptors to `classes.dex`, or to a new secondary dex when
    /// `secondary` is set.
    pub fn dex_classes(&mut self, classes: &[&str], secondary: bool) -> &mut Self {
        let strings = classes.iter().map(|s| s.to_string());
        if secondary {
            self.dex.push(strings.collect());
        } else {
            self.dex[0].extend(strings);
        }
        self
    }

    pub fn manifest(&self) -> XmlElement {
        let mut m = XmlElement::new("manifest")
            .android("versionCode", AttrValue::Int(1))
            .android("versionName", AttrValue::Str("1.0".into()))
            .plain("package", AttrValue::Str(self.package.clone()));
        if self.nsc_on_manifest {
            m = m.android("networkSecurityConfig", AttrValue::Ref(NSC_REF));
        }
        let mut sdk =
            XmlElement::new("uses-sdk").android("minSdkVersion", AttrValue::Int(self.min_sdk));
        if let Some(t) = self.target_sdk {
            sdk = sdk.android("targetSdkVersion", AttrValue::Int(t));
        }
        m = m.child(sdk);
        for p in &self.permissions {
            m = m.child(
                XmlElement::new("uses-permission").android("name", AttrValue::Str(p.clone())),
            );
        }

        let mut app = XmlElement::new("application")
            .android("label", AttrValue::Ref(LABEL_REF))
            .android("icon", AttrValue::Ref(ICON_REF));
        if let Some(b) = self.allow_backup {
            app = app.android("allowBackup", AttrValue::Bool(b));
        }
        if let Some(agent) = &self.backup_agent {
            app = app.android("backupAgent", AttrValue::Str(agent.clone()));
        }
        if let Some(r) = self.restore_any_version {
            app = app.android("restoreAnyVersion", AttrValue::Bool(r));
        }
        if self.full_backup_content {
            app = app.android("fullBackupContent", AttrValue::Ref(BACKUP_RULES_REF));
        }
        if self.data_extraction_rules {
            app = app.android("dataExtractionRules", AttrValue::Ref(EXTRACTION_RULES_REF));
        }
        if let Some(c) = self.uses_cleartext {
            app = app.android("usesCleartextTraffic", AttrValue::Bool(c));
        }
        if self.nsc_on_application {
            app = app.android("networkSecurityConfig", AttrValue::Ref(NSC_REF));
        }
        for (name, value) in &self.metadata {
            app = app.child(
                XmlElement::new("meta-data")
                    .android("name", AttrValue::Str(name.clone()))
                    .android("value", AttrValue::Str(value.clone())),
            );
        }
        app = app.children(self.components.iter().map(Component::element));
        m.child(app)
    }

    pub fn manifest_bytes(&self) -> Vec<u8> {
        AxmlWriter::default().encode(&self.manifest())
    }

    pub fn dex_files(&self) -> Vec<(String, Vec<u8>)> {
        self.dex
            .iter()
            .enumerate()
            .map(|(i, strings)| {
                let name = if i == 0 {
                    "classes.dex".to_string()
                } else {
                    format!("classes{}.dex", i + 1)
                };
                let refs: Vec<&str> = strings.iter().map(String::as_str).collect();
                (name, build_dex(&refs, "035"))
            })
            .collect()
    }

    pub fn apk(&self) -> Vec<u8> {
        let mut b = ApkBuilder::new().deflated("AndroidManifest.xml", self.manifest_bytes());
        for (name, bytes) in self.dex_files() {
            b = b.deflated(&name, bytes);
        }
        if let Some(nsc) = &self.nsc_file {
            b = b.deflated("res/xml/network_security_config.xml", nsc.encode());
        }
        b = b.stored("resources.arsc", vec![0u8; 16]);
        b.deflated("META-INF/MANIFEST.MF", "Manifest-Version: 1.0\r\n\r\n")
            .build()
    }

    pub fn file_name(&self) -> String {
        format!("{}.apk", self.slug)
    }
}

const FIREBASE_ANALYTICS_KEY: &str = "com.google.firebase.analytics.APPLICATION_ID";
const MOBILE_ADS_KEY: &str = "com.google.android.gms.ads.APPLICATION_ID";
const APPSFLYER_RECEIVER: &str = "com.appsflyer.SingleInstallBroadcastReceiver";

fn appsflyer_receiver() -> Component {
    Component::new("receiver", APPSFLYER_RECEIVER)
        .exported(true)
        .filter(Filter::new(&[ACTION_INSTALL_REFERRER], &[]))
}

/// Explicitly disables backups; minimal permissions; no trackers.
pub fn backup_disabled_app() -> AppSpec {
    let mut a = AppSpec::new(
        "app21_sudokuzen",
        "com.example.games.sudokuzen",
        Cohort::General,
        "low",
    );
    a.permissions.truncate(1);
    a.allow_backup = Some(false);
    a
}

/// Custom backup agent with permissive restore and an unresolvable network
/// security config reference.
pub fn backup_agent_app() -> AppSpec {
    let mut a = AppSpec::new(
        "app11_petclinic",
        "com.example.kids.petclinic",
        Cohort::Children,
        "medium",
    );
    a.allow_backup = Some(true);
    a.backup_agent = Some("com.example.kids.petclinic.PetBackupAgent".into());
    a.restore_any_version = Some(true);
    a.nsc_on_application = true;
    a
}

/// Network security config at manifest and application level plus explicit
/// cleartext allowance.
pub fn cleartext_nsc_app() -> AppSpec {
    let mut a = AppSpec::new(
        "app14_skyraiders",
        "com.example.games.skyraiders",
        Cohort::General,
        "high",
    );
    a.allow_backup = Some(false);
    a.uses_cleartext = Some(true);
    a.nsc_on_manifest = true;
    a.nsc_on_application = true;
    a.nsc_file = Some(NscFile {
        base_cleartext: Some(false),
        domain_cleartext: Vec::new(),
    });
    a.dex_classes(
        &[
            "Lcom/unity3d/ads/UnityAds;",
            "Lcom/unity3d/ads/IUnityAdsListener;",
        ],
        false,
    );
    a
}

/// Exported deep-link activity and exported unprotected upload service.
pub fn exposed_components_app() -> AppSpec {
    let mut a = AppSpec::new(
        "app15_cityheist",
        "com.example.games.cityheist",
        Cohort::General,
        "high",
    );
    a.allow_backup = Some(true);
    a.uses_cleartext = Some(true);
    a.component(
        Component::deep_link("com.example.sdk.DeepLinkActivity", "https", "example.com")
            .exported(true),
    );
    a.component(Component::new("service", "com.example.analytics.UploadService").exported(true));
    a
}

/// Analytics and advertising metadata keys plus an attribution receiver.
pub fn sdk_signals_app() -> AppSpec {
    let mut a = AppSpec::new(
        "app13_tankarena",
        "com.example.games.tankarena",
        Cohort::General,
        "high",
    );
    a.allow_backup = Some(true);
    a.meta(FIREBASE_ANALYTICS_KEY, "1:1234567890:android:abcdef");
    a.meta(MOBILE_ADS_KEY, "ca-app-pub-XXXXXXXXXXXXXXXX-YYYYYYYYYY");
    a.component(appsflyer_receiver());
    a
}

/// The 21-app corpus: 12 children-oriented apps (5 high, 7 medium) and 9
/// general-audience apps (4 high, 4 medium, 1 low), in file-name order.
pub fn corpus() -> Vec<AppSpec> {
    use Cohort::{Children, General};
    let mut apps = Vec::new();

    let mut a = AppSpec::new(
        "app01_paintbox",
        "com.example.kids.paintbox",
        Children,
        "high",
    );
    a.allow_backup = Some(false);
    a.uses_cleartext = Some(true);
    a.meta(FIREBASE_ANALYTICS_KEY, "1:1000000001:android:paintbox");
    apps.push(a);

    let mut a = AppSpec::new(
        "app02_abcpuzzle",
        "com.example.kids.abcpuzzle",
        Children,
        "high",
    );
    a.allow_backup = Some(false);
    a.meta(MOBILE_ADS_KEY, "ca-app-pub-0000000000000001-0000000001");
    a.component(appsflyer_receiver());
    apps.push(a);

    let mut a = AppSpec::new(
        "app03_farmfriends",
        "com.example.kids.farmfriends",
        Children,
        "high",
    );
    a.allow_backup = Some(true);
    a.dex_classes(
        &["Lcom/google/firebase/analytics/FirebaseAnalytics;"],
        false,
    );
    a.component(Component::new("service", ".sync.CloudSyncService").exported(true));
    a.component(
        Component::new("service", "com.example.kids.farmfriends.push.PushService").exported(true),
    );
    apps.push(a);

    let mut a = AppSpec::new(
        "app04_dinoracer",
        "com.example.kids.dinoracer",
        Children,
        "high",
    );
    a.allow_backup = Some(false);
    a.nsc_on_application = true;
    a.nsc_file = Some(NscFile {
        base_cleartext: Some(true),
        domain_cleartext: Vec::new(),
    });
    a.dex_classes(
        &[
            "Lcom/gameanalytics/sdk/GameAnalytics;",
            "Lcom/gameanalytics/sdk/GAPlatform;",
        ],
        true,
    );
    apps.push(a);

    let mut a = AppSpec::new(
        "app05_bubblepop",
        "com.example.kids.bubblepop",
        Children,
        "high",
    );
    a.dex_classes(&["Lcom/unity3d/ads/UnityAds;"], false);
    a.dex_classes(
        &["Lcom/adjust/sdk/Adjust;", "Lcom/adjust/sdk/AdjustConfig;"],
        true,
    );
    apps.push(a);

    let mut a = AppSpec::new(
        "app06_countingzoo",
        "com.example.kids.countingzoo",
        Children,
        "medium",
    );
    a.allow_backup = Some(false);
    a.meta(FIREBASE_ANALYTICS_KEY, "1:1000000006:android:countingzoo");
    apps.push(a);

    let mut a = AppSpec::new(
        "app07_colorcubes",
        "com.example.kids.colorcubes",
        Children,
        "medium",
    );
    a.target_sdk = None;
    apps.push(a);

    let mut a = AppSpec::new(
        "app08_storytime",
        "com.example.kids.storytime",
        Children,
        "medium",
    );
    a.allow_backup = Some(true);
    apps.push(a);

    let mut a = AppSpec::new(
        "app09_singalong",
        "com.example.kids.singalong",
        Children,
        "medium",
    );
    a.allow_backup = Some(false);
    a.permission("android.permission.RECORD_AUDIO");
    apps.push(a);

    let mut a = AppSpec::new(
        "app10_shapesorter",
        "com.example.kids.shapesorter",
        Children,
        "medium",
    );
    a.allow_backup = Some(false);
    a.component(Component::new("receiver", ".ReminderReceiver").exported(true));
    apps.push(a);

    apps.push(backup_agent_app());

    let mut a = AppSpec::new(
        "app12_letterhunt",
        "com.example.kids.letterhunt",
        Children,
        "medium",
    );
    a.allow_backup = Some(false);
    a.permission("com.google.android.gms.permission.AD_ID");
    apps.push(a);

    apps.push(sdk_signals_app());
    apps.push(cleartext_nsc_app());
    apps.push(exposed_components_app());

    let mut a = AppSpec::new(
        "app16_goldrush",
        "com.example.games.goldrush",
        General,
        "high",
    );
    a.allow_backup = Some(false);
    a.dex_classes(
        &[
            "Lcom/ironsource/mediationsdk/IronSource;",
            "Lcom/applovin/sdk/AppLovinSdk;",
            "Lcom/amplitude/api/Amplitude;",
        ],
        false,
    );
    apps.push(a);

    let mut a = AppSpec::new(
        "app17_soccerstars",
        "com.example.games.soccerstars",
        General,
        "medium",
    );
    a.allow_backup = Some(false);
    a.permission("android.permission.CAMERA");
    a.permission("android.permission.ACCESS_FINE_LOCATION");
    a.meta(MOBILE_ADS_KEY, "ca-app-pub-0000000000000017-0000000017");
    apps.push(a);

    let mut a = AppSpec::new(
        "app18_racingpro",
        "com.example.games.racingpro",
        General,
        "medium",
    );
    a.allow_backup = Some(false);
    a.uses_cleartext = Some(true);
    a.nsc_on_application = true;
    apps.push(a);

    let mut a = AppSpec::new(
        "app19_dungeonquest",
        "com.example.games.dungeonquest",
        General,
        "medium",
    );
    a.target_sdk = Some(30);
    a.permission("android.permission.WRITE_EXTERNAL_STORAGE");
    a.dex_classes(
        &["Lcom/google/firebase/analytics/FirebaseAnalytics;"],
        false,
    );
    a.component(Component::deep_link(
        ".InviteActivity",
        "dungeonquest",
        "invite",
    ));
    a.components[0].exported = None;
    apps.push(a);

    let mut a = AppSpec::new(
        "app20_chessmaster",
        "com.example.games.chessmaster",
        General,
        "medium",
    );
    a.allow_backup = Some(true);
    a.full_backup_content = true;
    a.data_extraction_rules = true;
    apps.push(a);

    apps.push(backup_disabled_app());
    apps
}

/// `app_id,cohort` labeling for the corpus, keyed by package id.
pub fn labels_csv(apps: &[AppSpec]) -> String {
    let mut s = String::from("app_id,cohort\n");
    for a in apps {
        s.push_str(&format!("{},{}\n", a.package, a.cohort.label()));
    }
    s
}
