#include "offpol/dataset.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "offpol/error.hpp"
#include "offpol/numeric.hpp"
#include "offpol/rng.hpp"

namespace offpol {

using nlohmann::json;

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::batched: return "batched";
        case Regime::adaptive: return "adaptive";
        case Regime::batched_crossfit: return "batched-crossfit";
    }
    return "unknown";
}

Regime regime_from_string(const std::string& name) {
    if (name == "batched") return Regime::batched;
    if (name == "adaptive") return Regime::adaptive;
    if (name == "batched-crossfit") return Regime::batched_crossfit;
    throw InvalidArgument("unknown regime '" + name + "'");
}

LoggedDataset::LoggedDataset(std::size_t num_contexts, std::size_t num_actions, Regime regime,
                             std::uint64_t seed)
    : num_contexts_(num_contexts), num_actions_(num_actions), regime_(regime), seed_(seed) {
    if (num_actions < 2) throw InvalidArgument("dataset needs K >= 2");
}

void LoggedDataset::reserve(std::size_t n) {
    records_.reserve(n);
    propensities_.reserve(n * num_actions_);
}

void LoggedDataset::push_back(const LogRecord& record, std::span<const double> propensities) {
    auto fail = [&](const std::string& why) {
        throw InvalidArgument("record t=" + std::to_string(record.t) + ": " + why);
    };
    if (propensities.size() != num_actions_) fail("propensity length != K");
    if (record.context >= num_contexts_) fail("context out of range");
    if (record.action >= num_actions_) fail("action out of range");
    if (!(record.reward >= 0.0 && record.reward <= 1.0)) fail("reward outside [0,1]");
    if (!on_simplex(propensities))
        check_simplex(propensities, "record t=" + std::to_string(record.t));
    if (!(propensities[record.action] > 0.0)) fail("logged action has zero propensity");
    records_.push_back(record);
    propensities_.insert(propensities_.end(), propensities.begin(), propensities.end());
}

LoggedDataset LoggedDataset::subset(std::span<const std::size_t> indices) const {
    LoggedDataset out(num_contexts_, num_actions_, regime_, seed_);
    out.reserve(indices.size());
    for (std::size_t i : indices) {
        out.records_.push_back(records_.at(i));
        auto row = propensities(i);
        out.propensities_.insert(out.propensities_.end(), row.begin(), row.end());
    }
    return out;
}

namespace {

// One generator per step keeps the record stream independent of how much
// randomness earlier steps consumed, so a history-free adaptive policy and
// the batched sampler see identical draws.
LoggedDataset generate(const BanditModel& model, const BehaviorPolicy& policy, std::size_t T,
                       std::uint64_t seed, Regime regime) {
    if (T == 0) throw InvalidArgument("T must be at least 1");
    if (policy.num_contexts() != model.num_contexts() || policy.num_actions() != model.num_actions())
        throw InvalidArgument("behavior policy and model disagree on contexts/actions");
    LoggedDataset data(model.num_contexts(), model.num_actions(), regime, seed);
    data.reserve(T);
    History history(model.num_contexts(), model.num_actions());
    std::vector<double> probs(model.num_actions());
    for (std::size_t t = 1; t <= T; ++t) {
        Rng rng(derive_seed(seed, {t}));
        const Context x = model.sample_context(rng);
        policy.propensities(StepInfo{t, T, seed}, x, history, probs);
        if (!on_simplex(probs)) check_simplex(probs, "behavior policy at t=" + std::to_string(t));
        const auto a = static_cast<Action>(sample_categorical(probs, rng));
        const double y = model.sample_reward(x, a, rng);
        data.push_back(LogRecord{t, x, a, y}, probs);
        history.record(x, a, y);
    }
    return data;
}

}  // namespace

LoggedDataset sample_batched(const BanditModel& model, const BehaviorPolicy& policy, std::size_t T,
                             std::uint64_t seed) {
    if (!policy.is_fixed_table())
        throw InvalidArgument("sample_batched needs a fixed-table behavior policy, got " +
                              policy.kind_name());
    return generate(model, policy, T, seed, Regime::batched);
}

LoggedDataset sample_adaptive(const BanditModel& model, const BehaviorPolicy& policy, std::size_t T,
                              std::uint64_t seed) {
    return generate(model, policy, T, seed, Regime::adaptive);
}

void write_csv(std::ostream& out, const LoggedDataset& data) {
    out << "t,context,action,reward";
    for (std::size_t a = 1; a <= data.num_actions(); ++a) out << ",p_" << a;
    out << '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LogRecord& r = data.record(i);
        out << r.t << ',' << r.context << ',' << r.action << ',' << format_double(r.reward);
        for (double p : data.propensities(i)) out << ',' << format_double(p);
        out << '\n';
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::size_t parse_index(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size() && !(pos + 1 == s.size() && s.back() == '\r')) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError("bad " + what + " field '" + s + "'");
    }
}

}  // namespace

LoggedDataset read_dataset_csv(std::istream& in, std::optional<Regime> regime) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty dataset CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 6 || header[0] != "t" || header[1] != "context" || header[2] != "action" ||
        header[3] != "reward")
        throw ParseError("dataset CSV header must be t,context,action,reward,p_1,...,p_K");
    const std::size_t k = header.size() - 4;
    for (std::size_t a = 0; a < k; ++a)
        if (header[4 + a] != "p_" + std::to_string(a + 1))
            throw ParseError("unexpected propensity column '" + header[4 + a] + "'");

    std::vector<LogRecord> records;
    std::vector<double> probs;
    std::size_t num_contexts = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": wrong field count");
        LogRecord r;
        r.t = parse_index(f[0], "t");
        r.context = static_cast<Context>(parse_index(f[1], "context"));
        r.action = static_cast<Action>(parse_index(f[2], "action"));
        r.reward = parse_double(f[3]);
        for (std::size_t a = 0; a < k; ++a) probs.push_back(parse_double(f[4 + a]));
        num_contexts = std::max<std::size_t>(num_contexts, r.context + 1);
        records.push_back(r);
    }

    if (!regime) {
        std::map<Context, std::size_t> first_row;
        bool constant = true;
        for (std::size_t i = 0; i < records.size() && constant; ++i) {
            auto [it, inserted] = first_row.emplace(records[i].context, i);
            if (!inserted)
                constant = std::equal(probs.begin() + i * k, probs.begin() + (i + 1) * k,
                                      probs.begin() + it->second * k);
        }
        regime = constant ? Regime::batched : Regime::adaptive;
    }

    LoggedDataset data(num_contexts, k, *regime, 0);
    data.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        data.push_back(records[i], std::span<const double>(probs.data() + i * k, k));
    return data;
}

std::string to_json_string(const LoggedDataset& data) {
    json j;
    j["regime"] = to_string(data.regime());
    j["seed"] = data.seed();
    j["num_contexts"] = data.num_contexts();
    j["num_actions"] = data.num_actions();
    json recs = json::array();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LogRecord& r = data.record(i);
        auto p = data.propensities(i);
        recs.push_back({{"t", r.t},
                        {"context", r.context},
                        {"action", r.action},
                        {"reward", r.reward},
                        {"propensities", std::vector<double>(p.begin(), p.end())}});
    }
    j["records"] = std::move(recs);
    return j.dump();
}

LoggedDataset dataset_from_json_string(const std::string& text) {
    try {
        const json j = json::parse(text);
        LoggedDataset data(j.at("num_contexts").get<std::size_t>(), j.at("num_actions").get<std::size_t>(),
                           regime_from_string(j.at("regime").get<std::string>()),
                           j.at("seed").get<std::uint64_t>());
        for (const auto& r : j.at("records")) {
            LogRecord rec{r.at("t").get<std::size_t>(), r.at("context").get<Context>(),
                          r.at("action").get<Action>(), r.at("reward").get<double>()};
            const auto p = r.at("propensities").get<std::vector<double>>();
            data.push_back(rec, p);
        }
        return data;
    } catch (const json::exception& e) {
        throw ParseError(std::string("dataset JSON: ") + e.what());
    }
}

}  // namespace offpol
