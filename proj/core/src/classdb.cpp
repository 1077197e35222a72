namespace redop {}
