#include "nh/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nh/errors.hpp"
#include "nh/random_field.hpp"

namespace nh {

void PipelineConfig::validate() const {
    if (dim != 2 && dim != 3) throw ParameterError("dim must be 2 or 3");
    if (fine < 1 || coarse < 1) throw ParameterError("grid sizes must be positive");
    if (fine % coarse != 0)
        throw ParameterError("fine cells per axis (" + std::to_string(fine) + ") must be a multiple of coarse (" +
                             std::to_string(coarse) + ")");
    if (static_cast<int>(field.l2.size()) != dim)
        throw ParameterError("field.l2 needs " + std::to_string(dim) + " values, got " + std::to_string(field.l2.size()));
    CovarianceSpec{field.sigma2, field.l2}.validate();
    if (!(field.energy_fraction > 0.0 && field.energy_fraction <= 1.0))
        throw ParameterError("field.energy_fraction must lie in (0, 1]");
    if (field.max_modes < 1) throw ParameterError("field.max_modes must be positive");
    if (!(field.e_bar > 0.0)) throw ParameterError("field.E_bar must be positive");
    if (!(poisson > 0.0 && poisson < 0.5)) throw ParameterError("material.poisson must lie in (0, 0.5)");
    biot.validate();
    time.validate();
    if (realizations < 1) throw ParameterError("dataset.realizations must be at least 1");
    split.validate();
    train.validate();
    if (solve_realizations < 1) throw ParameterError("solve.realizations must be at least 1");
}

bool PipelineConfig::operator==(const PipelineConfig& o) const { return serialize_config(*this) == serialize_config(o); }

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ParameterError("'" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
    return out;
}

template <class Int>
Int to_int(std::string_view key, std::string_view v) {
    Int out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ParameterError("'" + std::string(key) + "': expected an integer, got '" + std::string(v) + "'");
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParameterError("'" + std::string(key) + "': expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        out.push_back(to_double(key, item));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"pipeline.name", [](PipelineConfig& c, auto, auto v) { c.name = std::string(v); }},
        {"grid.dim", [](PipelineConfig& c, auto k, auto v) { c.dim = to_int<int>(k, v); }},
        {"grid.fine", [](PipelineConfig& c, auto k, auto v) { c.fine = to_int<int>(k, v); }},
        {"grid.coarse", [](PipelineConfig& c, auto k, auto v) { c.coarse = to_int<int>(k, v); }},
        {"field.sigma2", [](PipelineConfig& c, auto k, auto v) { c.field.sigma2 = to_double(k, v); }},
        {"field.l2", [](PipelineConfig& c, auto k, auto v) { c.field.l2 = to_list(k, v); }},
        {"field.energy_fraction", [](PipelineConfig& c, auto k, auto v) { c.field.energy_fraction = to_double(k, v); }},
        {"field.max_modes", [](PipelineConfig& c, auto k, auto v) { c.field.max_modes = to_int<int>(k, v); }},
        {"field.seed_base", [](PipelineConfig& c, auto k, auto v) { c.field.seed_base = to_int<std::uint64_t>(k, v); }},
        {"field.E_bar", [](PipelineConfig& c, auto k, auto v) { c.field.e_bar = to_double(k, v); }},
        {"field.alpha", [](PipelineConfig& c, auto k, auto v) { c.field.alpha = to_double(k, v); }},
        {"material.poisson", [](PipelineConfig& c, auto k, auto v) { c.poisson = to_double(k, v); }},
        {"poro.M_biot", [](PipelineConfig& c, auto k, auto v) { c.biot.biot_modulus = to_double(k, v); }},
        {"poro.alpha_biot", [](PipelineConfig& c, auto k, auto v) { c.biot.biot_coefficient = to_double(k, v); }},
        {"poro.nu_f", [](PipelineConfig& c, auto k, auto v) { c.biot.fluid_viscosity = to_double(k, v); }},
        {"poro.f", [](PipelineConfig& c, auto k, auto v) { c.biot.source = to_double(k, v); }},
        {"poro.p0", [](PipelineConfig& c, auto k, auto v) { c.time.p_initial = to_double(k, v); }},
        {"poro.p1", [](PipelineConfig& c, auto k, auto v) { c.time.p_inlet = to_double(k, v); }},
        {"poro.T_max", [](PipelineConfig& c, auto k, auto v) { c.time.t_max = to_double(k, v); }},
        {"poro.n_steps", [](PipelineConfig& c, auto k, auto v) { c.time.n_steps = to_int<int>(k, v); }},
        {"poro.lumped_mass", [](PipelineConfig& c, auto k, auto v) { c.time.lumped_mass = to_bool(k, v); }},
        {"dataset.realizations", [](PipelineConfig& c, auto k, auto v) { c.realizations = to_int<int>(k, v); }},
        {"split.test_fraction", [](PipelineConfig& c, auto k, auto v) { c.split.test_fraction = to_double(k, v); }},
        {"split.train_fraction", [](PipelineConfig& c, auto k, auto v) { c.split.train_fraction = to_double(k, v); }},
        {"split.seed", [](PipelineConfig& c, auto k, auto v) { c.split.seed = to_int<std::uint64_t>(k, v); }},
        {"train.epochs", [](PipelineConfig& c, auto k, auto v) { c.train.epochs = to_int<int>(k, v); }},
        {"train.batch_size", [](PipelineConfig& c, auto k, auto v) { c.train.batch_size = to_int<std::size_t>(k, v); }},
        {"train.learning_rate", [](PipelineConfig& c, auto k, auto v) { c.train.learning_rate = to_double(k, v); }},
        {"train.dropout", [](PipelineConfig& c, auto k, auto v) { c.train.dropout = to_double(k, v); }},
        {"train.seed", [](PipelineConfig& c, auto k, auto v) { c.train.seed = to_int<std::uint64_t>(k, v); }},
        {"solve.realizations", [](PipelineConfig& c, auto k, auto v) { c.solve_realizations = to_int<int>(k, v); }},
        {"solve.seed_offset",
         [](PipelineConfig& c, auto k, auto v) { c.solve_seed_offset = to_int<std::uint64_t>(k, v); }},
    };
    return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
    struct Entry {
        std::string key, value;
        int line;
    };
    std::vector<Entry> entries;
    std::string section;
    std::string preset_name;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParameterError("line " + std::to_string(line_no) + ": malformed section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParameterError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key == "pipeline.preset")
            preset_name = value;
        else
            entries.push_back({key, value, line_no});
    }
    PipelineConfig cfg = preset_name.empty() ? PipelineConfig{} : preset(preset_name);
    for (const auto& e : entries) {
        const auto it = setters().find(e.key);
        if (it == setters().end())
            throw ParameterError("line " + std::to_string(e.line) + ": unknown setting '" + e.key + "'");
        it->second(cfg, e.key, e.value);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ParameterError& e) {
        throw ParameterError(path.string() + ": " + e.what());
    }
}

std::string serialize_config(const PipelineConfig& c) {
    std::ostringstream os;
    auto list = [](const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
        return s;
    };
    os << "[pipeline]\nname = " << c.name << "\n\n";
    os << "[grid]\ndim = " << c.dim << "\nfine = " << c.fine << "\ncoarse = " << c.coarse << "\n\n";
    os << "[field]\nsigma2 = " << fmt_double(c.field.sigma2) << "\nl2 = " << list(c.field.l2)
       << "\nenergy_fraction = " << fmt_double(c.field.energy_fraction) << "\nmax_modes = " << c.field.max_modes
       << "\nseed_base = " << c.field.seed_base << "\nE_bar = " << fmt_double(c.field.e_bar)
       << "\nalpha = " << fmt_double(c.field.alpha) << "\n\n";
    os << "[material]\npoisson = " << fmt_double(c.poisson) << "\n\n";
    os << "[poro]\nM_biot = " << fmt_double(c.biot.biot_modulus) << "\nalpha_biot = " << fmt_double(c.biot.biot_coefficient)
       << "\nnu_f = " << fmt_double(c.biot.fluid_viscosity) << "\nf = " << fmt_double(c.biot.source)
       << "\np0 = " << fmt_double(c.time.p_initial) << "\np1 = " << fmt_double(c.time.p_inlet)
       << "\nT_max = " << fmt_double(c.time.t_max) << "\nn_steps = " << c.time.n_steps
       << "\nlumped_mass = " << (c.time.lumped_mass ? "true" : "false") << "\n\n";
    os << "[dataset]\nrealizations = " << c.realizations << "\n\n";
    os << "[split]\ntest_fraction = " << fmt_double(c.split.test_fraction)
       << "\ntrain_fraction = " << fmt_double(c.split.train_fraction) << "\nseed = " << c.split.seed << "\n\n";
    os << "[train]\nepochs = " << c.train.epochs << "\nbatch_size = " << c.train.batch_size
       << "\nlearning_rate = " << fmt_double(c.train.learning_rate) << "\ndropout = " << fmt_double(c.train.dropout)
       << "\nseed = " << c.train.seed << "\n\n";
    os << "[solve]\nrealizations = " << c.solve_realizations << "\nseed_offset = " << c.solve_seed_offset << "\n";
    return os.str();
}

PipelineConfig preset(std::string_view name) {
    PipelineConfig c;
    c.name = std::string(name);
    if (name == "test1" || name == "test2") {
        c.dim = 2;
        c.fine = 320;
        c.coarse = 10;
        c.realizations = 100;
    } else if (name == "test3") {
        c.dim = 3;
        c.fine = 60;
        c.coarse = 5;
        c.realizations = 100;
    } else if (name == "desk-test1" || name == "desk-test2") {
        c.dim = 2;
        c.fine = 128;
        c.coarse = 8;
        c.realizations = 20;
    } else if (name == "desk-test3") {
        c.dim = 3;
        c.fine = 24;
        c.coarse = 4;
        c.realizations = 20;
    } else {
        throw ParameterError("unknown preset '" + std::string(name) + "'");
    }
    if (name == "test2" || name == "desk-test2")
        c.field.l2 = {0.1, 0.4};
    else if (c.dim == 3)
        c.field.l2 = {0.2, 0.2, 0.2};
    else
        c.field.l2 = {0.2, 0.2};
    return c;
}

std::vector<std::string> preset_names() {
    return {"test1", "test2", "test3", "desk-test1", "desk-test2", "desk-test3"};
}

}  // namespace nh
