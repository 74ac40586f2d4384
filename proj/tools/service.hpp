#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace promobn::service {

inline constexpr int kDefaultPort = 8080;
inline constexpr const char* kPortEnv = "PROMO_BN_PORT";

// --port wins over PROMO_BN_PORT, which wins over 8080.
int resolve_port(std::optional<int> flag);

struct ServiceOptions {
    std::uint64_t default_seed = 42;
    std::size_t default_iterations = 10000;
    std::size_t kde_samples = 100000;
    unsigned workers = 1;
};

// JSON-over-HTTP what-if sessions. Each session owns a network, its evidence
// and a seed; the engine itself is stateless.
class WhatIfService {
public:
    explicit WhatIfService(ServiceOptions options = {});
    ~WhatIfService();
    WhatIfService(const WhatIfService&) = delete;
    WhatIfService& operator=(const WhatIfService&) = delete;

    void register_routes(httplib::Server& server);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Blocks serving on 0.0.0.0:port until the server is stopped.
int serve(int port, const ServiceOptions& options = {});

}  // namespace promobn::service
