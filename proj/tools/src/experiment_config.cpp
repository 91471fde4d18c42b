#include "ticl_cli/experiment_config.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "ticl/error.hpp"
#include "ticl/parallel.hpp"

namespace ticl::cli {

using json = nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

template <typename T> T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::ConfigError, where + "." + key + " has the wrong type");
    }
}

ProviderSpec parse_provider(ProviderKind kind, const json& obj, const std::filesystem::path& base,
                            const ProviderSpec* inherit) {
    const std::string where = "providers." + std::string(to_string(kind));
    if (!obj.is_object()) fail(ErrorCode::ConfigError, where + " must be an object");

    ProviderSpec spec = inherit ? *inherit : ProviderSpec{};
    spec.kind = kind;
    if (obj.contains("backend")) spec.backend = parse_backend(get_or<std::string>(obj, "backend", "", where));
    if (obj.contains("path")) spec.endpoint_or_path = resolve(base, get_or<std::string>(obj, "path", "", where)).string();
    if (obj.contains("endpoint")) spec.endpoint_or_path = get_or<std::string>(obj, "endpoint", "", where);
    if (obj.contains("index")) spec.index_path = resolve(base, get_or<std::string>(obj, "index", "", where)).string();
    spec.model_id = get_or<std::string>(obj, "model_id", spec.model_id, where);
    spec.dim = get_or<std::size_t>(obj, "dim", spec.dim, where);
    if (obj.contains("seed")) spec.seed = get_or<std::uint64_t>(obj, "seed", 0, where);
    spec.policy = get_or<std::string>(obj, "policy", spec.policy, where);
    spec.noise_scale = get_or<double>(obj, "noise_scale", spec.noise_scale, where);
    spec.zero_shot_distance = get_or<double>(obj, "zero_shot_distance", spec.zero_shot_distance, where);
    if (obj.contains("fixtures")) spec.fixtures = get_or<std::map<std::string, std::string>>(obj, "fixtures", {}, where);
    if (obj.contains("fixtures_manifest")) {
        spec.fixtures_path = resolve(base, get_or<std::string>(obj, "fixtures_manifest", "", where)).string();
    }
    spec.timeout_seconds = get_or<double>(obj, "timeout_s", spec.timeout_seconds, where);
    spec.serial_only = get_or<bool>(obj, "serial_only", spec.serial_only, where);
    return spec;
}

ProviderSpecs parse_providers(const json& obj, const std::filesystem::path& base, const ProviderSpecs* inherit) {
    ProviderSpecs specs;
    if (!obj.is_object()) fail(ErrorCode::ConfigError, "providers must be an object");
    for (const auto& [name, value] : obj.items()) {
        const ProviderKind kind = parse_provider_kind(name);
        const ProviderSpec* parent = nullptr;
        if (inherit) {
            if (auto it = inherit->find(kind); it != inherit->end()) parent = &it->second;
        }
        specs[kind] = parse_provider(kind, value, base, parent);
    }
    return specs;
}

void finalize_spec(ProviderSpec& spec, const ExperimentConfig& cfg, const Overrides& overrides) {
    if (spec.backend == Backend::Mock && (overrides.seed || !spec.seed)) spec.seed = cfg.seed;
    if (spec.backend == Backend::Http && overrides.bearer_token) spec.bearer_token = *overrides.bearer_token;
}

std::vector<std::size_t> parse_k_values(const json& obj, const std::string& where) {
    return get_or<std::vector<std::size_t>>(obj, "k_values", {1, 2, 3, 4}, where);
}

} // namespace

ProviderSpecs ExperimentConfig::providers_for(const DatasetConfig& dataset) const {
    ProviderSpecs specs = providers;
    for (const auto& [kind, spec] : dataset.provider_overrides) specs[kind] = spec;
    return specs;
}

ExperimentConfig parse_experiment_config(std::string_view text, const std::filesystem::path& base_dir,
                                         const Overrides& overrides) {
    const json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) fail(ErrorCode::ConfigError, "config is not a JSON object");

    ExperimentConfig cfg;
    cfg.seed = overrides.seed.value_or(get_or<std::uint64_t>(doc, "seed", 0, "config"));
    cfg.max_in_flight = get_or<std::size_t>(doc, "max_in_flight", kDefaultMaxInFlight, "config");
    cfg.retries = get_or<int>(doc, "retries", 2, "config");
    if (cfg.max_in_flight == 0) fail(ErrorCode::ConfigError, "max_in_flight must be at least 1");
    if (cfg.retries < 0) fail(ErrorCode::ConfigError, "retries must be >= 0");

    if (auto it = doc.find("providers"); it != doc.end()) cfg.providers = parse_providers(*it, base_dir, nullptr);

    if (auto it = doc.find("retrieval"); it != doc.end()) {
        const json& r = *it;
        cfg.retrieval.M = get_or<std::size_t>(r, "M", kDefaultPoolSize, "retrieval");
        cfg.retrieval.K = get_or<std::size_t>(r, "K", 1, "retrieval");
        cfg.retrieval.ordering = parse_ordering(get_or<std::string>(r, "ordering", "similar_last", "retrieval"));
        cfg.retrieve_method = parse_method(get_or<std::string>(r, "method", "ticl_plus", "retrieval"));
        for (const auto& id : get_or<std::vector<std::string>>(r, "exclude_ids", {}, "retrieval")) {
            cfg.retrieval.exclude_ids.insert(id);
        }
    }

    if (auto it = doc.find("eval"); it != doc.end()) {
        const json& e = *it;
        if (e.contains("methods")) {
            cfg.eval.methods.clear();
            for (const auto& m : get_or<std::vector<std::string>>(e, "methods", {}, "eval")) {
                cfg.eval.methods.push_back(parse_method(m));
            }
        }
        cfg.eval.k_values = parse_k_values(e, "eval");
        cfg.eval.M = get_or<std::size_t>(e, "M", kDefaultPoolSize, "eval");
        cfg.eval.ordering = parse_ordering(get_or<std::string>(e, "ordering", "similar_last", "eval"));
        cfg.eval.text_norm = parse_text_norm(get_or<std::string>(e, "text_norm", "default", "eval"));
        cfg.eval.aggregation = parse_aggregation(get_or<std::string>(e, "aggregation", "pooled", "eval"));
    }
    cfg.eval.seed = cfg.seed;
    cfg.eval.jobs = overrides.jobs.value_or(default_jobs());
    cfg.eval.validate();

    auto add_dataset = [&](const json& d, const std::string& fallback_name) {
        DatasetConfig ds;
        ds.name = get_or<std::string>(d, "name", fallback_name, "dataset");
        ds.store = resolve(base_dir, get_or<std::string>(d, "store", "", "dataset"));
        ds.test_manifest = resolve(base_dir, get_or<std::string>(d, "test_manifest", "", "dataset"));
        if (auto p = d.find("providers"); p != d.end()) {
            ds.provider_overrides = parse_providers(*p, base_dir, &cfg.providers);
        }
        cfg.datasets.push_back(std::move(ds));
    };
    if (auto it = doc.find("datasets"); it != doc.end()) {
        if (!it->is_array()) fail(ErrorCode::ConfigError, "datasets must be an array");
        std::size_t i = 0;
        for (const auto& d : *it) add_dataset(d, "dataset" + std::to_string(i++));
    } else if (doc.contains("store")) {
        add_dataset(doc, "default");
    }

    for (auto& [kind, spec] : cfg.providers) finalize_spec(spec, cfg, overrides);
    for (auto& ds : cfg.datasets) {
        for (auto& [kind, spec] : ds.provider_overrides) finalize_spec(spec, cfg, overrides);
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const Overrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ConfigError, "cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_experiment_config(text, path.parent_path(), overrides);
}

ProviderSet make_providers(const ProviderSpecs& specs, std::size_t max_in_flight, int retries) {
    auto find = [&](ProviderKind k) -> const ProviderSpec* {
        auto it = specs.find(k);
        return it == specs.end() ? nullptr : &it->second;
    };
    std::unique_ptr<TextEmbedder> text;
    std::unique_ptr<AcousticEmbedder> acoustic;
    std::unique_ptr<AsrProvider> asr;
    std::unique_ptr<SiclModel> sicl;
    if (auto* s = find(ProviderKind::TextEmbedder)) text = make_text_embedder(*s);
    if (auto* s = find(ProviderKind::AcousticEmbedder)) acoustic = make_acoustic_embedder(*s);
    if (auto* s = find(ProviderKind::Asr)) asr = make_asr(*s);
    if (auto* s = find(ProviderKind::SiclModel)) sicl = make_sicl_model(*s);

    ProviderSet set(std::move(text), std::move(acoustic), std::move(asr), std::move(sicl), max_in_flight, retries);
    for (const auto& [kind, spec] : specs) {
        if (spec.serial_only) set.make_serial(kind);
    }
    return set;
}

} // namespace ticl::cli
