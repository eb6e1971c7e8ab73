#include "pipgan/training.hpp"

#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <sstream>

#include "pipgan/errors.hpp"
#include "pipgan/evaluation.hpp"
#include "pipgan/logging.hpp"

namespace pipgan {
namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double checked(const torch::Tensor& t, const char* term, long step) {
    const double v = t.item<double>();
    if (!std::isfinite(v)) throw NonFiniteLoss(term, step);
    return v;
}

AttributeSchema schema_from_config(const Config& c, Attribute attribute) {
    if (auto categories = c.get_list("stage.categories"); !categories.empty()) {
        return {to_string(attribute), categories, static_cast<int>(c.get_int("stage.neutral", 0))};
    }
    const std::string key = "schema." + to_string(attribute);
    if (auto categories = c.get_list(key); !categories.empty()) {
        return {to_string(attribute), categories, static_cast<int>(c.get_int(key + "_neutral", 0))};
    }
    return attribute == Attribute::pose ? AttributeSchema::kdef_pose() : AttributeSchema::kdef_expression();
}

void set_requires_grad(torch::nn::Module& module, bool value) {
    for (auto& p : module.parameters()) p.set_requires_grad(value);
}

std::vector<int64_t> batch_indices_check(const std::vector<SampleRecord>& batch, const TrainConfig& config) {
    std::vector<int64_t> labels;
    for (const auto& r : batch) {
        if (r.condition.dim != config.schema.size()) {
            throw SchemaMismatch("record condition has " + std::to_string(r.condition.dim) + " classes, stage '" +
                                 config.stage_name + "' has " + std::to_string(config.schema.size()));
        }
        labels.push_back(r.condition.k);
    }
    return labels;
}

torch::Tensor stack_images(const std::vector<SampleRecord>& records, bool inputs) {
    std::vector<torch::Tensor> images;
    images.reserve(records.size());
    for (const auto& r : records) images.push_back(inputs ? r.input : r.target);
    return torch::stack(images);
}

}  // namespace

// --- config ---

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (max_steps < 1) throw InvalidArgument("max_steps must be >= 1");
    if (d_steps_per_g_step < 1) throw InvalidArgument("d_steps_per_g_step must be >= 1");
    weights.validate();
    schema.validate();
    if (network.num_classes != schema.size()) {
        throw SchemaMismatch("network has " + std::to_string(network.num_classes) + " classes, schema has " +
                             std::to_string(schema.size()));
    }
    network.validate();
}

TrainConfig TrainConfig::from_config(const Config& c) {
    TrainConfig t;
    t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
    t.adam_beta1 = c.get_double("train.adam_beta1", t.adam_beta1);
    t.adam_beta2 = c.get_double("train.adam_beta2", t.adam_beta2);
    t.batch_size = static_cast<int>(c.get_int("train.batch_size", t.batch_size));
    t.max_steps = c.get_int("train.max_steps", t.max_steps);
    t.d_steps_per_g_step = static_cast<int>(c.get_int("train.d_steps_per_g_step", t.d_steps_per_g_step));
    t.seed = static_cast<std::uint64_t>(c.get_int("train.seed", c.get_int("seed", 0)));
    t.deterministic = c.get_bool("train.deterministic", t.deterministic);
    t.eval_every = c.get_int("train.eval_every", t.eval_every);
    t.gp_in_generator = c.get_bool("train.gp_in_generator", t.gp_in_generator);
    const auto form = c.get_string("train.adversarial_form", "non_saturating");
    if (form == "non_saturating") {
        t.adversarial_form = AdversarialForm::non_saturating;
    } else if (form == "saturating") {
        t.adversarial_form = AdversarialForm::saturating;
    } else {
        throw InvalidArgument("unknown train.adversarial_form '" + form + "'");
    }

    auto& n = t.network;
    n.image_size = static_cast<int>(c.get_int("model.image_size", c.get_int("data.image_size", n.image_size)));
    n.encoder_depth = static_cast<int>(c.get_int("model.encoder_depth", n.encoder_depth));
    n.base_channels = static_cast<int>(c.get_int("model.base_channels", n.base_channels));
    n.noise_mode = parse_noise_mode(c.get_string("model.noise_mode", to_string(n.noise_mode)));
    n.dropout = c.get_double("model.dropout", n.dropout);
    n.disc_depth = static_cast<int>(c.get_int("model.disc_depth", n.disc_depth));
    n.disc_base_channels = static_cast<int>(c.get_int("model.disc_base_channels", n.disc_base_channels));
    n.residual_kernel = static_cast<int>(c.get_int("model.residual_kernel", n.residual_kernel));
    n.zero_init_final = c.get_bool("model.zero_init_final", n.zero_init_final);

    auto& w = t.weights;
    w.adversarial = c.get_double("loss.xi1", w.adversarial);
    w.cascade = c.get_double("loss.xi2", w.cascade);
    w.gradient_penalty = c.get_double("loss.xi3", w.gradient_penalty);
    w.classification = c.get_double("loss.xi4", w.classification);
    w.l1 = c.get_double("loss.xi5", w.l1);
    t.lambda_mode = parse_lambda_mode(c.get_string("loss.lambda_mode", to_string(t.lambda_mode)));
    t.cascade_weights_path = c.get_string("cascade.weights_path", "");

    t.attribute = parse_attribute(c.get_string("stage.attribute", c.get_string("stage.name", "pose")));
    t.stage_name = c.get_string("stage.name", to_string(t.attribute));
    t.schema = schema_from_config(c, t.attribute);
    n.num_classes = t.schema.size();
    return t;
}

Config TrainConfig::to_config() const {
    Config c;
    c.set("train.learning_rate", num(learning_rate));
    c.set("train.adam_beta1", num(adam_beta1));
    c.set("train.adam_beta2", num(adam_beta2));
    c.set("train.batch_size", std::to_string(batch_size));
    c.set("train.max_steps", std::to_string(max_steps));
    c.set("train.d_steps_per_g_step", std::to_string(d_steps_per_g_step));
    c.set("train.seed", std::to_string(seed));
    c.set("train.deterministic", deterministic ? "true" : "false");
    c.set("train.eval_every", std::to_string(eval_every));
    c.set("train.gp_in_generator", gp_in_generator ? "true" : "false");
    c.set("train.adversarial_form",
          adversarial_form == AdversarialForm::non_saturating ? "non_saturating" : "saturating");
    c.set("model.image_size", std::to_string(network.image_size));
    c.set("model.encoder_depth", std::to_string(network.encoder_depth));
    c.set("model.base_channels", std::to_string(network.base_channels));
    c.set("model.noise_mode", to_string(network.noise_mode));
    c.set("model.dropout", num(network.dropout));
    c.set("model.disc_depth", std::to_string(network.disc_depth));
    c.set("model.disc_base_channels", std::to_string(network.disc_base_channels));
    c.set("model.residual_kernel", std::to_string(network.residual_kernel));
    c.set("model.zero_init_final", network.zero_init_final ? "true" : "false");
    c.set("loss.xi1", num(weights.adversarial));
    c.set("loss.xi2", num(weights.cascade));
    c.set("loss.xi3", num(weights.gradient_penalty));
    c.set("loss.xi4", num(weights.classification));
    c.set("loss.xi5", num(weights.l1));
    c.set("loss.lambda_mode", to_string(lambda_mode));
    c.set("cascade.weights_path", cascade_weights_path);
    c.set("stage.name", stage_name);
    c.set("stage.attribute", to_string(attribute));
    c.set("stage.categories", join(schema.categories));
    c.set("stage.neutral", std::to_string(schema.neutral_index));
    return c;
}

// --- state ---

TrainState TrainState::create(const TrainConfig& config) {
    config.validate();
    if (config.deterministic) {
        torch::set_num_threads(1);
        at::globalContext().setDeterministicAlgorithms(true, false);
    }
    if (config.weights.gradient_penalty > 0.0) require_double_backward();

    TrainState state;
    state.config = config;
    torch::manual_seed(config.seed);
    state.generator = Generator(config.network);
    state.critic.discriminator = Discriminator(config.network);
    state.critic.cascade = make_cascade_net(config.cascade_weights_path, config.seed ^ 0xC45CADEULL);
    state.critic.lambdas = cascade_lambdas(state.critic.cascade, config.network.image_size, config.lambda_mode);

    auto adam = [&](std::vector<torch::Tensor> params) {
        return std::make_unique<torch::optim::Adam>(
            std::move(params), torch::optim::AdamOptions(config.learning_rate)
                                   .betas({config.adam_beta1, config.adam_beta2}));
    };
    state.generator_optimizer = adam(state.generator->parameters());
    state.discriminator_optimizer = adam(state.critic.discriminator->parameters());
    state.rng = make_generator(config.seed + 1);
    state.batch_rng.seed(config.seed + 2);
    return state;
}

std::string to_string(TrainPhase phase) {
    switch (phase) {
        case TrainPhase::discriminator_update: return "discriminator_update";
        case TrainPhase::classification_pass: return "classification_pass";
        case TrainPhase::generation_pass: return "generation_pass";
        case TrainPhase::generator_update: return "generator_update";
    }
    return "unknown";
}

StepReport train_step(TrainState& state, const std::vector<SampleRecord>& batch, const PhaseObserver& observer) {
    if (batch.empty()) throw InvalidArgument("train_step needs a non-empty batch");
    const auto& cfg = state.config;
    const auto& w = cfg.weights;
    const long step = state.step + 1;
    auto& gen = state.generator;
    auto& disc = state.critic.discriminator;

    const auto labels = torch::tensor(batch_indices_check(batch, cfg), torch::kLong);
    std::vector<ConditionVector> conditions;
    for (const auto& r : batch) conditions.push_back(r.condition);
    const auto x = stack_images(batch, true);
    const auto y = stack_images(batch, false);
    const auto c = stack_conditions(conditions);

    StepReport report;
    auto& losses = report.losses;
    losses.step = step;
    auto notify = [&](TrainPhase phase) {
        report.phases.push_back(phase);
        if (observer) observer(phase, state);
    };

    gen->train();
    disc->train();
    auto fake = gen->generate(x, c, state.rng);
    CriticFn critic = [&disc](const torch::Tensor& cond, const torch::Tensor& cand) { return disc->score(cond, cand); };

    // (1) discriminator
    torch::Tensor alpha;
    for (int i = 0; i < cfg.d_steps_per_g_step; ++i) {
        state.discriminator_optimizer->zero_grad();
        auto adv_d = adversarial_d_loss(disc->forward(x, y), disc->forward(x, fake.detach()));
        losses.adv_d = checked(adv_d, "adv_d", step);
        auto d_total = adv_d;
        if (w.gradient_penalty > 0.0) {
            alpha = sample_alpha(x.size(0), state.rng, x.scalar_type());
            auto gp = gradient_penalty(critic, x, y, fake.detach(), alpha);
            losses.gp = checked(gp, "gp", step);
            d_total = d_total + w.gradient_penalty * gp;
        }
        d_total.backward();
        state.discriminator_optimizer->step();
        ++report.discriminator_optimizer_steps;
    }
    notify(TrainPhase::discriminator_update);

    // (2) classification pass on the labeled targets
    state.generator_optimizer->zero_grad();
    if (w.classification > 0.0) {
        auto enc = gen->encode(y);
        auto pc = classification_loss(gen->classify_code(enc.y_c1), labels);
        losses.pc = checked(pc, "pc", step);
        (w.classification * pc).backward();
    }
    notify(TrainPhase::classification_pass);

    // (3) generation pass
    set_requires_grad(*disc, false);
    LossParts parts;
    parts.adversarial = adversarial_g_loss(disc->forward(x, fake), cfg.adversarial_form);
    losses.adv_g = checked(parts.adversarial, "adv_g", step);
    if (w.cascade > 0.0) {
        parts.cascade = cascade_loss(state.critic.cascade, y, fake, state.critic.lambdas);
        losses.cascade = checked(parts.cascade, "cascade", step);
    }
    parts.l1 = pipgan::l1_loss(y, fake);
    losses.l1 = checked(parts.l1, "l1", step);
    LossWeights g_weights = w;
    g_weights.classification = 0.0;
    if (cfg.gp_in_generator && w.gradient_penalty > 0.0) {
        if (!alpha.defined()) alpha = sample_alpha(x.size(0), state.rng, x.scalar_type());
        parts.gradient_penalty = gradient_penalty(critic, x, y, fake, alpha);
    } else {
        g_weights.gradient_penalty = 0.0;
    }
    auto g_total = total_generator_loss(parts, g_weights);
    checked(g_total, "total", step);
    g_total.backward();
    set_requires_grad(*disc, true);
    losses.total = w.adversarial * losses.adv_g + w.cascade * losses.cascade + w.gradient_penalty * losses.gp +
                   w.classification * losses.pc + w.l1 * losses.l1;
    notify(TrainPhase::generation_pass);

    // (4) one generator update after both passes
    state.generator_optimizer->step();
    ++report.generator_optimizer_steps;
    state.step = step;
    notify(TrainPhase::generator_update);
    return report;
}

torch::Tensor generate_records(TrainState& state, const std::vector<SampleRecord>& records, int batch_size) {
    torch::NoGradGuard guard;
    auto& gen = state.generator;
    const bool was_training = gen->is_training();
    gen->eval();
    auto rng = make_generator(state.config.seed + 7919);
    std::vector<torch::Tensor> outputs;
    for (std::size_t begin = 0; begin < records.size(); begin += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(records.size(), begin + static_cast<std::size_t>(batch_size));
        std::vector<SampleRecord> chunk(records.begin() + static_cast<std::ptrdiff_t>(begin),
                                        records.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<ConditionVector> conditions;
        for (const auto& r : chunk) conditions.push_back(r.condition);
        outputs.push_back(gen->generate(stack_images(chunk, true), stack_conditions(conditions), rng));
    }
    gen->train(was_training);
    return torch::cat(outputs);
}

MetricSnapshot evaluate_records(TrainState& state, const std::vector<SampleRecord>& records, long step) {
    MetricSnapshot snapshot;
    snapshot.step = step;
    if (records.empty()) return snapshot;
    auto generated = generate_records(state, records);
    std::vector<PairMetrics> per_image;
    double l1_sum = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& g = generated[static_cast<int64_t>(i)];
        l1_sum += (g - records[i].target).abs().mean().item<double>();
        auto m = image_metrics(g, records[i].target);
        per_image.push_back({std::to_string(i), m.psnr, m.mse, m.rmse});
    }
    auto report = make_report(std::move(per_image));
    snapshot.l1 = l1_sum / static_cast<double>(records.size());
    snapshot.psnr = report.aggregate.psnr;
    snapshot.mse = report.aggregate.mse;
    snapshot.rmse = report.aggregate.rmse;
    return snapshot;
}

TrainResult train_stage(const TrainConfig& config, const std::vector<SampleRecord>& train,
                        const std::vector<SampleRecord>& eval,
                        const std::function<void(const LossRecord&)>& on_step) {
    if (train.empty()) throw InvalidArgument("training set for stage '" + config.stage_name + "' is empty");
    TrainResult result{TrainState::create(config), {}, {}};
    auto& state = result.state;
    const auto& eval_set = eval.empty() ? train : eval;

    result.history.push_back(evaluate_records(state, eval_set, 0));

    std::deque<std::size_t> queue;
    auto refill = [&] {
        std::vector<std::size_t> order(train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[state.batch_rng() % (i + 1)]);
        queue.insert(queue.end(), order.begin(), order.end());
    };
    const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), train.size());
    std::vector<SampleRecord> batch;
    for (long s = 0; s < config.max_steps; ++s) {
        batch.clear();
        while (batch.size() < batch_size) {
            if (queue.empty()) refill();
            batch.push_back(train[queue.front()]);
            queue.pop_front();
        }
        auto report = train_step(state, batch);
        result.losses.push_back(report.losses);
        if (on_step) on_step(report.losses);
        if (config.eval_every > 0 && state.step % config.eval_every == 0 && state.step != config.max_steps) {
            result.history.push_back(evaluate_records(state, eval_set, state.step));
        }
    }
    result.history.push_back(evaluate_records(state, eval_set, state.step));
    return result;
}

std::string loss_log_header() { return "step,loss_adv_d,loss_adv_g,loss_pc,loss_cascade,loss_gp,loss_l1,total"; }

std::string format_loss_row(const LossRecord& r) {
    return std::to_string(r.step) + "," + num(r.adv_d) + "," + num(r.adv_g) + "," + num(r.pc) + "," +
           num(r.cascade) + "," + num(r.gp) + "," + num(r.l1) + "," + num(r.total);
}

void write_loss_log(const std::filesystem::path& path, const std::vector<LossRecord>& losses) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write loss log: " + path.string());
    out << loss_log_header() << '\n';
    for (const auto& r : losses) out << format_loss_row(r) << '\n';
}

}  // namespace pipgan
