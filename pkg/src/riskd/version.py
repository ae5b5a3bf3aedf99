VERSION = "0.1.0"
ENGINE = f"riskd {VERSION}"
