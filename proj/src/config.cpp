#include "offpol/config.hpp"

#include <fstream>
#include <sstream>

#include "offpol/error.hpp"

namespace offpol {

using nlohmann::json;

namespace {

template <typename F>
auto parse_guard(const char* what, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

json noise_to_json(const NoiseLaw& law) {
    if (law.kind == NoiseKind::truncated_gaussian)
        return json{{"kind", to_string(law.kind)}, {"sigma", law.sigma}};
    return to_string(law.kind);
}

NoiseLaw noise_from_json(const json& j) {
    if (j.is_string()) return NoiseLaw{noise_kind_from_string(j.get<std::string>()), 0.0};
    NoiseLaw law{noise_kind_from_string(j.at("kind").get<std::string>()), 0.0};
    if (j.contains("sigma")) law.sigma = j.at("sigma").get<double>();
    return law;
}

using Table = std::vector<std::vector<double>>;

}  // namespace

json to_json(const BanditModel& model) {
    const std::size_t n = model.num_contexts();
    const std::size_t k = model.num_actions();
    Table means(n, std::vector<double>(k));
    bool uniform_noise = true;
    const NoiseLaw first = model.noise(0, 0);
    json noise = json::array();
    for (std::size_t x = 0; x < n; ++x) {
        json row = json::array();
        for (std::size_t a = 0; a < k; ++a) {
            const auto cx = static_cast<Context>(x);
            const auto ca = static_cast<Action>(a);
            means[x][a] = model.mean(cx, ca);
            row.push_back(noise_to_json(model.noise(cx, ca)));
            if (!(model.noise(cx, ca) == first)) uniform_noise = false;
        }
        noise.push_back(std::move(row));
    }
    return json{{"context_probs", model.context_probs()},
                {"mean_reward", means},
                {"noise", uniform_noise ? noise_to_json(first) : noise}};
}

BanditModel model_from_json(const json& j) {
    return parse_guard("model", [&] {
        auto probs = j.at("context_probs").get<std::vector<double>>();
        auto means = j.at("mean_reward").get<Table>();
        if (!j.contains("noise")) return BanditModel(std::move(probs), std::move(means));
        const json& noise = j.at("noise");
        if (!noise.is_array()) return BanditModel(std::move(probs), std::move(means), noise_from_json(noise));
        std::vector<std::vector<NoiseLaw>> laws;
        for (const json& row : noise) {
            auto& out = laws.emplace_back();
            for (const json& cell : row) out.push_back(noise_from_json(cell));
        }
        return BanditModel(std::move(probs), std::move(means), std::move(laws));
    });
}

json to_json(const BehaviorPolicy& policy) {
    json j{{"kind", policy.kind_name()}};
    std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, FixedTable>) {
                j["table"] = s.table;
            } else if constexpr (std::is_same_v<S, EpsilonDecay>) {
                j["epsilon0"] = s.epsilon0;
                j["decay"] = s.decay;
            } else if constexpr (std::is_same_v<S, ThompsonLike>) {
                j["draws"] = s.draws;
            } else if constexpr (std::is_same_v<S, PolynomialFloor>) {
                j["c_bar"] = s.c_bar;
                j["gamma"] = s.gamma;
                j["floor_actions"] = s.floor_actions;
            } else {
                if (s.rule) throw InvalidArgument("a callable custom schedule cannot be serialized");
                json segs = json::array();
                for (const auto& seg : s.segments) segs.push_back(json{{"from_t", seg.from_t}, {"table", seg.table}});
                j["segments"] = std::move(segs);
            }
        },
        policy.spec());
    return j;
}

BehaviorPolicy behavior_from_json(const json& j, std::size_t num_contexts, std::size_t num_actions) {
    return parse_guard("behavior", [&] {
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "fixed-table")
            return BehaviorPolicy(num_contexts, num_actions, FixedTable{j.at("table").get<Table>()});
        if (kind == "epsilon-decay")
            return BehaviorPolicy(num_contexts, num_actions,
                                  EpsilonDecay{j.value("epsilon0", 1.0), j.value("decay", 0.5)});
        if (kind == "thompson-like")
            return BehaviorPolicy(num_contexts, num_actions, ThompsonLike{j.value("draws", std::size_t{1024})});
        if (kind == "polynomial-floor") {
            PolynomialFloor spec{j.at("c_bar").get<double>(), j.at("gamma").get<double>(), {}};
            const json& fa = j.at("floor_actions");
            if (fa.is_array() && !fa.empty() && fa.front().is_number()) {
                // one list shared by every context
                spec.floor_actions.assign(num_contexts, fa.get<std::vector<Action>>());
            } else {
                spec.floor_actions = fa.get<std::vector<std::vector<Action>>>();
            }
            return BehaviorPolicy(num_contexts, num_actions, std::move(spec));
        }
        if (kind == "custom-schedule") {
            CustomSchedule spec;
            for (const json& seg : j.at("segments"))
                spec.segments.push_back(ScheduleSegment{seg.at("from_t").get<std::size_t>(), seg.at("table").get<Table>()});
            return BehaviorPolicy(num_contexts, num_actions, std::move(spec));
        }
        throw InvalidArgument("unknown behavior kind '" + kind + "'");
    });
}

json to_json(const PolicyClass& policies) {
    const ClassGenerator& gen = policies.generator();
    json j{{"generator", gen.name},
           {"num_contexts", policies.num_contexts()},
           {"num_actions", policies.num_actions()}};
    if (gen.name == "threshold") {
        j["below"] = gen.below;
        j["above"] = gen.above;
    } else if (gen.name != "all-maps") {
        json list = json::array();
        for (const Policy& p : policies.policies()) list.push_back(json{{"id", p.id}, {"actions", p.actions}});
        j["policies"] = std::move(list);
    }
    if (policies.declared_ndim()) j["ndim"] = *policies.declared_ndim();
    return j;
}

PolicyClass class_from_json(const json& j) {
    return parse_guard("class", [&] {
        const auto gen = j.value("generator", std::string("explicit"));
        const auto n = j.at("num_contexts").get<std::size_t>();
        const auto k = j.at("num_actions").get<std::size_t>();
        if (gen == "all-maps") return PolicyClass::all_maps(n, k);
        if (gen == "threshold")
            return PolicyClass::threshold(n, k, j.value("below", Action{0}), j.value("above", Action{1}));
        if (gen != "explicit") throw InvalidArgument("unknown class generator '" + gen + "'");
        std::vector<Policy> list;
        PolicyId next = 0;
        for (const json& p : j.at("policies")) {
            if (p.is_array()) {
                list.push_back(Policy{next++, p.get<PolicyMap>()});
            } else {
                list.push_back(Policy{p.at("id").get<PolicyId>(), p.at("actions").get<PolicyMap>()});
                next = list.back().id + 1;
            }
        }
        std::optional<std::size_t> ndim;
        if (j.contains("ndim")) ndim = j.at("ndim").get<std::size_t>();
        return PolicyClass(n, k, std::move(list), ndim);
    });
}

HardInstanceSpec HardFamily::at(std::size_t T) const {
    HardInstanceSpec spec{d, K, v, overlap, T, 0.0};
    spec.delta_gap = delta_gap ? *delta_gap : calibrated_gap(d, T, overlap);
    return spec;
}

InstanceConfig instance_from_json(const json& j) {
    return parse_guard("instance", [&]() -> InstanceConfig {
        const auto family = j.at("family").get<std::string>();
        if (family == "inline") {
            BanditModel model = model_from_json(j.at("model"));
            BehaviorPolicy behavior = behavior_from_json(j.at("behavior"), model.num_contexts(), model.num_actions());
            PolicyClass policies = class_from_json(j.at("class"));
            if (policies.num_contexts() != model.num_contexts() || policies.num_actions() != model.num_actions())
                throw InvalidArgument("class dimensions do not match the model");
            return InlineInstance{std::move(model), std::move(behavior), std::move(policies)};
        }
        HardFamily h;
        h.d = j.at("d").get<std::size_t>();
        h.K = j.value("K", std::size_t{3});
        h.v = j.contains("v") ? j.at("v").get<std::vector<int>>() : std::vector<int>(h.d, 1);
        if (family == "lower-fixed") {
            h.overlap = FixedOverlap{j.value("C_star", 0.5)};
        } else if (family == "lower-adaptive") {
            h.overlap = DecayingOverlap{j.value("c_bar", 0.5), j.value("gamma", 0.5)};
        } else {
            throw InvalidArgument("unknown instance family '" + family + "'");
        }
        if (j.contains("delta_gap") && !j.at("delta_gap").is_null()) h.delta_gap = j.at("delta_gap").get<double>();
        // validate eagerly with a placeholder horizon when the gap is fixed
        if (h.delta_gap) build_instance(h.at(1));
        return h;
    });
}

json to_json(const InstanceConfig& instance) {
    if (const auto* inl = std::get_if<InlineInstance>(&instance))
        return json{{"family", "inline"},
                    {"model", to_json(inl->model)},
                    {"behavior", to_json(inl->behavior)},
                    {"class", to_json(inl->policies)}};
    const auto& h = std::get<HardFamily>(instance);
    json j{{"d", h.d}, {"K", h.K}, {"v", h.v}};
    if (const auto* f = std::get_if<FixedOverlap>(&h.overlap)) {
        j["family"] = "lower-fixed";
        j["C_star"] = f->c_star;
    } else {
        const auto& a = std::get<DecayingOverlap>(h.overlap);
        j["family"] = "lower-adaptive";
        j["c_bar"] = a.c_bar;
        j["gamma"] = a.gamma;
    }
    if (h.delta_gap) j["delta_gap"] = *h.delta_gap;
    return j;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace offpol
