# MeloStega package
